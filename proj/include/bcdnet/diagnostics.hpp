#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bcdnet/matrix.hpp"
#include "bcdnet/network.hpp"
#include "bcdnet/operators.hpp"

namespace bcdnet {

/// Raised when a convergence certificate fails during training.
class DiagnosticError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-epoch record; epoch 0 is the initialization snapshot. Fields that a
/// run does not produce (SGD, or residual diagnostics outside the backward
/// order) carry the -1 sentinel.
struct TraceRecord {
    std::size_t epoch = 0;
    ObjectiveBreakdown objective;
    double delta_sq = 0.0;
    double residual_norm = -1.0;
    double bbar_bound = -1.0;
    double train_acc = -1.0;
    double test_acc = -1.0;
    double wall_seconds = 0.0;
};

/// Descent coefficient of the sufficient-descent inequality:
/// min{alpha/2, gamma/2}, with the extra alpha + (gamma - L_R)/2 term under
/// the prox-linear output update.
inline double descent_coefficient(const Hyperparams& hp, double risk_grad_lip = 0.0) {
    double a = std::min(hp.alpha / 2.0, hp.gamma / 2.0);
    if (hp.vn_strategy == OutputStrategy::ProxLinear)
        a = std::min(a, hp.alpha + (hp.gamma - risk_grad_lip) / 2.0);
    return a;
}

struct DescentCheck {
    bool pass = false;
    double slack = 0.0;  // (prev - cur) - a * delta_sq
};

/// prev_total - cur_total >= a * delta_sq, with 1e-8 float headroom.
inline DescentCheck descent_check(double prev_total, double cur_total, double delta_sq,
                                  double a) {
    DescentCheck out;
    out.slack = (prev_total - cur_total) - a * delta_sq;
    out.pass = out.slack >= -1e-8;
    return out;
}

/// b from the relative-error lemma, scaled to bbar = b * sqrt(3N). The
/// residual form carries its own max expression.
inline double bbar_constant(SplitForm form, double bound, double lips, double gamma,
                            double alpha, std::size_t depth, double risk_grad_lip,
                            bool proxlinear) {
    const double B = bound, L = lips, g = gamma;
    const double vn_coeff = alpha + g * B + (proxlinear ? risk_grad_lip : 0.0);
    double b = 0.0;
    if (form == SplitForm::Residual) {
        b = std::max({alpha + g * L, vn_coeff, 2.0 * g * (1.0 + B + B * B),
                      g * (1.0 + L * B + 2.0 * B + 2.0 * B * B)});
    } else {
        b = std::max({g, vn_coeff, alpha + g * L, g * B + 2.0 * g * B * B,
                      2.0 * g * B + g * B * B});
    }
    return b * std::sqrt(3.0 * static_cast<double>(depth));
}

namespace detail {

inline Matrix maybe_augment(const Matrix& v, bool bias) {
    return bias ? augment_ones(v) : v;
}

/// gamma * [(W vk - U) vk^T - (W vp - U) vp^T] - alpha * (W - Wp),
/// the exhibited element of the W_i block.
inline Matrix weight_block_element(const Matrix& w_cur, const Matrix& w_prev, const Matrix& u_cur,
                                   const Matrix& v_cur_aug, const Matrix& v_prev_aug,
                                   double gamma, double alpha) {
    Matrix cur_res = matmul(w_cur, v_cur_aug);
    cur_res -= u_cur;
    Matrix prev_res = matmul(w_cur, v_prev_aug);
    prev_res -= u_cur;
    Matrix g = matmul_nt(cur_res, v_cur_aug);
    g -= matmul_nt(prev_res, v_prev_aug);
    g *= gamma;
    Matrix prox = w_cur;
    prox -= w_prev;
    prox *= alpha;
    g -= prox;
    return g;
}

}  // namespace detail

/// Norm of the explicit subgradient element exhibited by the relative-error
/// lemma, assembled block-by-block from the differences of two consecutive
/// backward-order iterates. Requires the epoch's blocks to have been solved
/// exactly; in the two-splitting form that limits it to identity activations.
inline double subgrad_residual(SplitForm form, const NetworkSpec& spec, const SplitState& prev,
                               const SplitState& cur, const Matrix& x, const Matrix& y,
                               const Hyperparams& hp) {
    const std::size_t depth = spec.depth();
    const bool wants_preacts = form != SplitForm::TwoSplit;
    if (wants_preacts != cur.has_preacts() || wants_preacts != prev.has_preacts())
        throw std::invalid_argument("subgrad_residual: state does not match form " +
                                    std::string(split_form_name(form)));
    if (form == SplitForm::TwoSplit)
        for (const Activation& act : spec.activations)
            if (act.kind != ActivationKind::Identity)
                throw std::invalid_argument(
                    "subgrad_residual: the two-splitting construction requires identity "
                    "activations (other blocks are solved inexactly)");

    const double g = hp.gamma, a = hp.alpha;
    double sum_sq = 0.0;
    auto add = [&sum_sq](const Matrix& m) { sum_sq += fro_norm_sq(m); };

    // state of layer l (1-based); layer 0 is the fixed input
    auto v_of = [&](const SplitState& s, std::size_t l) -> const Matrix& {
        return l == 0 ? x : s.states[l - 1];
    };

    // --- output block V_N ---
    {
        const Matrix& vn_c = cur.states[depth - 1];
        const Matrix& vn_p = prev.states[depth - 1];
        Matrix e = vn_c;
        e -= vn_p;
        e *= -a;
        if (form == SplitForm::TwoSplit) {
            // -gamma * (W_N^k aV_{N-1}^k - W_N^{k-1} aV_{N-1}^{k-1})
            Matrix anchor = apply_weight(cur.weights[depth - 1], v_of(cur, depth - 1), spec.bias);
            anchor -= apply_weight(prev.weights[depth - 1], v_of(prev, depth - 1), spec.bias);
            anchor *= g;
            e -= anchor;
        } else {
            Matrix du = cur.preacts[depth - 1];
            du -= prev.preacts[depth - 1];
            du *= g;
            e -= du;
        }
        if (form == SplitForm::Residual && depth >= 1) {
            Matrix dv = v_of(cur, depth - 1);
            dv -= v_of(prev, depth - 1);
            dv *= g;
            e -= dv;
        }
        if (hp.vn_strategy == OutputStrategy::ProxLinear) {
            e += risk_gradient(hp.loss, vn_c, y);
            e -= risk_gradient(hp.loss, vn_p, y);
        }
        add(e);
    }

    // --- per-layer blocks ---
    for (std::size_t l = 1; l <= depth; ++l) {
        const Matrix vprev_cur_aug = detail::maybe_augment(v_of(cur, l - 1), spec.bias);
        const Matrix vprev_prev_aug = detail::maybe_augment(v_of(prev, l - 1), spec.bias);
        const Activation& act = spec.activations[l - 1];

        if (wants_preacts) {
            // U_l element: -gamma (W^k aV^k - W^{k-1} aV^{k-1}),
            // plus the proximal term except at the output layer
            Matrix e = matmul(cur.weights[l - 1], vprev_cur_aug);
            e -= matmul(prev.weights[l - 1], vprev_prev_aug);
            e *= -g;
            if (l < depth) {
                Matrix du = cur.preacts[l - 1];
                du -= prev.preacts[l - 1];
                du *= a;
                e -= du;
            }
            if (form == SplitForm::Residual) {
                Matrix dv = v_of(cur, l - 1);
                dv -= v_of(prev, l - 1);
                if (l == depth) {
                    dv *= g;
                    e += dv;
                } else {
                    const Matrix& u = cur.preacts[l - 1];
                    for (std::size_t kk = 0; kk < dv.size(); ++kk)
                        dv.data()[kk] *= g * activation_subgrad(act, u.data()[kk]);
                    e += dv;
                }
            }
            add(e);
        }

        if (l < depth) {
            // V_l element
            Matrix e(spec.dims[l], x.cols());
            if (form == SplitForm::TwoSplit) {
                Matrix cur_pre = apply_weight(cur.weights[l - 1], v_of(cur, l - 1), spec.bias);
                Matrix prev_pre = apply_weight(prev.weights[l - 1], v_of(prev, l - 1), spec.bias);
                e = activation_apply(act, cur_pre);
                e -= activation_apply(act, prev_pre);
            } else {
                e = activation_apply(act, cur.preacts[l - 1]);
                e -= activation_apply(act, prev.preacts[l - 1]);
            }
            e *= -g;
            if (form == SplitForm::Residual) {
                Matrix dv = v_of(cur, l - 1);
                dv -= v_of(prev, l - 1);
                dv *= g;
                e -= dv;
            }
            if (form == SplitForm::TwoSplit) {
                Matrix dv = cur.states[l - 1];
                dv -= prev.states[l - 1];
                dv *= a;
                e -= dv;
            }
            add(e);
        }

        // W_l element; the anchor is U_l in the preactivation forms, V_l in
        // the two-splitting form (identity output/hidden links there)
        const Matrix& anchor = wants_preacts ? cur.preacts[l - 1] : cur.states[l - 1];
        add(detail::weight_block_element(cur.weights[l - 1], prev.weights[l - 1], anchor,
                                         vprev_cur_aug, vprev_prev_aug, g, a));
    }

    return std::sqrt(sum_sq);
}

struct RateSummary {
    std::vector<double> cesaro;  // (1/K) sum_{k<=K} delta_sq_k
    std::vector<double> bound;   // total_0 / (a K)
    bool pass = false;
};

/// Cesaro averages of the squared displacements against the O(1/K) bound
/// total_0 / (a K). Expects trace[0] to be the initialization record.
inline RateSummary rate_summary(const std::vector<TraceRecord>& trace, double a) {
    if (trace.empty()) throw std::invalid_argument("rate_summary: empty trace");
    RateSummary out;
    const double total0 = trace.front().objective.total;
    out.pass = true;
    double acc = 0.0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        acc += trace[k].delta_sq;
        const double kk = static_cast<double>(k);
        out.cesaro.push_back(acc / kk);
        out.bound.push_back(total0 / (a * kk));
        if (out.cesaro.back() > out.bound.back() + 1e-8) out.pass = false;
    }
    return out;
}

}  // namespace bcdnet
