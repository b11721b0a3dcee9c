#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcdnet/matrix.hpp"
#include "bcdnet/operators.hpp"
#include "bcdnet/rng.hpp"

namespace bcdnet {

enum class SplitForm { TwoSplit, ThreeSplit, Residual };

inline const char* split_form_name(SplitForm f) {
    switch (f) {
        case SplitForm::TwoSplit: return "two_split";
        case SplitForm::ThreeSplit: return "three_split";
        case SplitForm::Residual: return "residual";
    }
    return "?";
}

/// Layer dimensions d_0..d_N, one activation per layer (the output layer is
/// always the identity), plus the residual and bias switches.
struct NetworkSpec {
    std::vector<std::size_t> dims;
    std::vector<Activation> activations;
    bool residual = false;
    bool bias = false;

    std::size_t depth() const { return dims.empty() ? 0 : dims.size() - 1; }
    std::size_t input_dim() const { return dims.front(); }
    std::size_t output_dim() const { return dims.back(); }

    /// columns of W_i, i.e. d_{i-1} plus the constant row when biased
    std::size_t weight_cols(std::size_t layer) const {
        return dims[layer - 1] + (bias ? 1 : 0);
    }

    void validate() const {
        if (dims.size() < 2)
            throw std::invalid_argument("NetworkSpec: need at least input and output dims");
        for (std::size_t d : dims)
            if (d == 0) throw std::invalid_argument("NetworkSpec: dims must be positive");
        if (activations.size() != depth())
            throw std::invalid_argument("NetworkSpec: need one activation per layer, got " +
                                        std::to_string(activations.size()) + " for depth " +
                                        std::to_string(depth()));
        if (activations.back().kind != ActivationKind::Identity)
            throw std::invalid_argument("NetworkSpec: the output activation must be identity");
        if (residual) {
            // V_i - V_{i-1} appears for every layer, so all dims must agree.
            for (std::size_t i = 1; i < dims.size(); ++i)
                if (dims[i] != dims[i - 1])
                    throw std::invalid_argument(
                        "NetworkSpec: residual networks need equal layer dims, got d_" +
                        std::to_string(i - 1) + "=" + std::to_string(dims[i - 1]) + " vs d_" +
                        std::to_string(i) + "=" + std::to_string(dims[i]));
        }
    }
};

/// The iterate of the splitting formulations: weights W_1..W_N, states
/// V_1..V_N and, for the three-splitting and residual forms, the
/// pre-activations U_1..U_N. V_0 is the fixed input and lives outside.
struct SplitState {
    std::vector<Matrix> weights;
    std::vector<Matrix> states;
    std::vector<Matrix> preacts;

    bool has_preacts() const { return !preacts.empty(); }

    double norm_sq() const {
        double s = 0.0;
        for (const Matrix& m : weights) s += fro_norm_sq(m);
        for (const Matrix& m : states) s += fro_norm_sq(m);
        for (const Matrix& m : preacts) s += fro_norm_sq(m);
        return s;
    }

    bool all_finite() const {
        for (const Matrix& m : weights)
            if (!m.all_finite()) return false;
        for (const Matrix& m : states)
            if (!m.all_finite()) return false;
        for (const Matrix& m : preacts)
            if (!m.all_finite()) return false;
        return true;
    }
};

/// ||P^k - P^{k-1}||_F^2 over all blocks.
inline double state_delta_sq(const SplitState& a, const SplitState& b) {
    if (a.weights.size() != b.weights.size() || a.states.size() != b.states.size() ||
        a.preacts.size() != b.preacts.size())
        throw std::invalid_argument("state_delta_sq: block structure mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.weights.size(); ++i)
        s += fro_norm_sq_diff(a.weights[i], b.weights[i]);
    for (std::size_t i = 0; i < a.states.size(); ++i)
        s += fro_norm_sq_diff(a.states[i], b.states[i]);
    for (std::size_t i = 0; i < a.preacts.size(); ++i)
        s += fro_norm_sq_diff(a.preacts[i], b.preacts[i]);
    return s;
}

enum class UpdateOrder { Backward, Forward, Custom };
enum class OutputStrategy { ProximalExact, ProxLinear };

struct Hyperparams {
    double gamma = 1.0;
    double alpha = 1.0;
    LossKind loss = LossKind::Squared;
    std::vector<Regularizer> w_reg;  // per layer; empty means none everywhere
    std::vector<Regularizer> v_reg;
    UpdateOrder update_order = UpdateOrder::Backward;
    std::vector<std::size_t> custom_order;  // 1-based layer indices
    OutputStrategy vn_strategy = OutputStrategy::ProximalExact;
    std::size_t inner_iters = 300;
    double inner_tol = 1e-12;
    std::uint64_t seed = 1;

    Regularizer w_reg_at(std::size_t layer) const {
        return w_reg.empty() ? Regularizer::none() : w_reg.at(layer - 1);
    }
    Regularizer v_reg_at(std::size_t layer) const {
        return v_reg.empty() ? Regularizer::none() : v_reg.at(layer - 1);
    }

    void validate(std::size_t depth, std::size_t n, std::size_t d_out) const {
        if (!(gamma > 0.0)) throw std::invalid_argument("Hyperparams: gamma must be positive");
        if (!(alpha > 0.0)) throw std::invalid_argument("Hyperparams: alpha must be positive");
        if (!(inner_iters > 0)) throw std::invalid_argument("Hyperparams: inner_iters must be positive");
        if (!(inner_tol > 0.0)) throw std::invalid_argument("Hyperparams: inner_tol must be positive");
        if (!w_reg.empty() && w_reg.size() != depth)
            throw std::invalid_argument("Hyperparams: w_reg must have one entry per layer");
        if (!v_reg.empty() && v_reg.size() != depth)
            throw std::invalid_argument("Hyperparams: v_reg must have one entry per layer");
        if (update_order == UpdateOrder::Custom) {
            if (custom_order.empty())
                throw std::invalid_argument("Hyperparams: custom update order is empty");
            for (std::size_t l : custom_order)
                if (l < 1 || l > depth)
                    throw std::invalid_argument("Hyperparams: custom order layer " +
                                                std::to_string(l) + " out of range");
        }
        if (loss == LossKind::Hinge && vn_strategy == OutputStrategy::ProxLinear)
            throw std::invalid_argument(
                "Hyperparams: hinge loss requires the exact proximal output update");
        if (loss == LossKind::CrossEntropy && vn_strategy == OutputStrategy::ProximalExact)
            throw std::invalid_argument(
                "Hyperparams: cross-entropy loss requires the prox-linear output update");
        if (vn_strategy == OutputStrategy::ProxLinear && n > 0) {
            const double lr = risk_grad_lipschitz(loss, n, d_out);
            if (!(alpha > std::max(0.0, (lr - gamma) / 2.0)))
                throw std::invalid_argument(
                    "Hyperparams: prox-linear updates need alpha > max{0,(L_R-gamma)/2}");
        }
    }
};

/// Per-epoch objective pieces: total = risk + w_reg + v_reg + penalty.
struct ObjectiveBreakdown {
    double risk = 0.0;
    double w_reg = 0.0;
    double v_reg = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

/// Appends the constant 1-row used to absorb biases into the weights.
inline Matrix augment_ones(const Matrix& v) {
    Matrix out(v.rows() + 1, v.cols());
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) out(i, j) = v(i, j);
    for (std::size_t j = 0; j < v.cols(); ++j) out(v.rows(), j) = 1.0;
    return out;
}

/// Product of W's leading columns with V; ignores W's bias column if any.
inline Matrix matmul_view_no_bias(const Matrix& w, const Matrix& v) {
    Matrix out(w.rows(), v.cols());
    const std::size_t k = v.rows();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double* wrow = w.row(i);
        double* orow = out.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double wip = wrow[p];
            const double* vrow = v.row(p);
            for (std::size_t j = 0; j < v.cols(); ++j) orow[j] += wip * vrow[j];
        }
    }
    return out;
}

/// W * aug(V) when biased, otherwise W * V.
inline Matrix apply_weight(const Matrix& w, const Matrix& v, bool bias) {
    if (!bias) return matmul(w, v);
    if (w.cols() != v.rows() + 1)
        throw std::invalid_argument("apply_weight: dimension mismatch " + w.shape() +
                                    " vs aug " + v.shape());
    Matrix out = matmul_view_no_bias(w, v);
    const std::size_t bcol = w.cols() - 1;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double wb = w(i, bcol);
        double* orow = out.row(i);
        for (std::size_t j = 0; j < v.cols(); ++j) orow[j] += wb;
    }
    return out;
}

/// Gaussian weight init with the bias column pinned to bias_val.
inline std::vector<Matrix> init_weights(const NetworkSpec& spec, double std_dev, double bias_val,
                                        std::uint64_t seed) {
    spec.validate();
    if (std_dev < 0.0) throw std::invalid_argument("init_weights: std must be nonnegative");
    Rng rng(seed);
    std::vector<Matrix> weights;
    weights.reserve(spec.depth());
    for (std::size_t l = 1; l <= spec.depth(); ++l) {
        Matrix w(spec.dims[l], spec.weight_cols(l));
        const std::size_t main_cols = spec.dims[l - 1];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < main_cols; ++j) w(i, j) = std_dev * rng.normal();
            if (spec.bias) w(i, main_cols) = bias_val;
        }
        weights.push_back(std::move(w));
    }
    return weights;
}

/// Single forward pass that seeds the split variables:
/// U_i = W_i aug(V_{i-1}), V_i = sigma_i(U_i) (+ V_{i-1} when residual).
inline SplitState forward_init(const NetworkSpec& spec, const std::vector<Matrix>& weights,
                               const Matrix& x, bool with_preacts = true) {
    spec.validate();
    if (weights.size() != spec.depth())
        throw std::invalid_argument("forward_init: expected " + std::to_string(spec.depth()) +
                                    " weight matrices");
    if (x.rows() != spec.input_dim())
        throw std::invalid_argument("forward_init: input has " + std::to_string(x.rows()) +
                                    " rows, spec wants " + std::to_string(spec.input_dim()));
    SplitState state;
    state.weights = weights;
    const Matrix* prev = &x;
    for (std::size_t l = 1; l <= spec.depth(); ++l) {
        Matrix u = apply_weight(weights[l - 1], *prev, spec.bias);
        Matrix v = activation_apply(spec.activations[l - 1], u);
        if (spec.residual) v += *prev;
        state.states.push_back(std::move(v));
        if (with_preacts) state.preacts.push_back(std::move(u));
        prev = &state.states.back();
    }
    return state;
}

/// Plain network output Phi(X; W), no split variables involved.
inline Matrix network_output(const NetworkSpec& spec, const std::vector<Matrix>& weights,
                             const Matrix& x) {
    Matrix v = x;
    for (std::size_t l = 1; l <= spec.depth(); ++l) {
        Matrix u = apply_weight(weights[l - 1], v, spec.bias);
        Matrix next = activation_apply(spec.activations[l - 1], u);
        if (spec.residual) next += v;
        v = std::move(next);
    }
    return v;
}

/// Fraction of columns whose argmax row matches the label; ties go to the
/// lowest row index.
inline double predict_accuracy(const NetworkSpec& spec, const std::vector<Matrix>& weights,
                               const Matrix& x, const std::vector<int>& labels) {
    if (labels.size() != x.cols())
        throw std::invalid_argument("predict_accuracy: labels/columns mismatch");
    const Matrix out = network_output(spec, weights, x);
    std::size_t hits = 0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
        std::size_t best = 0;
        double best_val = out(0, j);
        for (std::size_t i = 1; i < out.rows(); ++i)
            if (out(i, j) > best_val) {
                best_val = out(i, j);
                best = i;
            }
        if (static_cast<int>(best) == labels[j]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(out.cols());
}

/// Objective of the chosen splitting form, reported per term.
inline ObjectiveBreakdown eval_objective(SplitForm form, const NetworkSpec& spec,
                                         const SplitState& state, const Matrix& x,
                                         const Matrix& y, const Hyperparams& hp) {
    const std::size_t depth = spec.depth();
    if (state.weights.size() != depth || state.states.size() != depth)
        throw std::invalid_argument("eval_objective: state does not match the network depth");
    const bool wants_preacts = form != SplitForm::TwoSplit;
    if (wants_preacts != state.has_preacts())
        throw std::invalid_argument("eval_objective: pre-activations " +
                                    std::string(state.has_preacts() ? "present" : "missing") +
                                    " for form " + split_form_name(form));

    ObjectiveBreakdown out;
    out.risk = risk_value(hp.loss, state.states.back(), y);
    for (std::size_t l = 1; l <= depth; ++l) {
        out.w_reg += reg_value(hp.w_reg_at(l), state.weights[l - 1]);
        out.v_reg += reg_value(hp.v_reg_at(l), state.states[l - 1]);
    }

    double penalty = 0.0;
    const Matrix* prev = &x;
    for (std::size_t l = 1; l <= depth; ++l) {
        const Matrix& v = state.states[l - 1];
        const Matrix wv = apply_weight(state.weights[l - 1], *prev, spec.bias);
        switch (form) {
            case SplitForm::TwoSplit: {
                const Matrix sig = activation_apply(spec.activations[l - 1], wv);
                penalty += fro_norm_sq_diff(v, sig);
                break;
            }
            case SplitForm::ThreeSplit: {
                const Matrix& u = state.preacts[l - 1];
                const Matrix sig = activation_apply(spec.activations[l - 1], u);
                penalty += fro_norm_sq_diff(v, sig) + fro_norm_sq_diff(u, wv);
                break;
            }
            case SplitForm::Residual: {
                const Matrix& u = state.preacts[l - 1];
                Matrix sig = activation_apply(spec.activations[l - 1], u);
                sig += *prev;
                penalty += fro_norm_sq_diff(v, sig) + fro_norm_sq_diff(u, wv);
                break;
            }
        }
        prev = &v;
    }
    out.penalty = 0.5 * hp.gamma * penalty;
    out.total = out.risk + out.w_reg + out.v_reg + out.penalty;
    return out;
}

}  // namespace bcdnet
