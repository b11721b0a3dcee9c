#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "bcdnet/matrix.hpp"

namespace bcdnet {

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class ActivationKind { Identity, ReLU, LeakyReLU, Sigmoid, Tanh };

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double slope = 0.01;  // LeakyReLU negative-side slope, in (0,1)

    static Activation identity() { return {ActivationKind::Identity, 0.0}; }
    static Activation relu() { return {ActivationKind::ReLU, 0.0}; }
    static Activation leaky_relu(double slope) {
        if (!(slope > 0.0 && slope < 1.0))
            throw std::invalid_argument("leaky_relu: slope must be in (0,1), got " +
                                        std::to_string(slope));
        return {ActivationKind::LeakyReLU, slope};
    }
    static Activation sigmoid() { return {ActivationKind::Sigmoid, 0.0}; }
    static Activation tanh() { return {ActivationKind::Tanh, 0.0}; }

    bool operator==(const Activation& o) const {
        return kind == o.kind && (kind != ActivationKind::LeakyReLU || slope == o.slope);
    }
};

inline double sigmoid_scalar(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

inline double activation_apply(const Activation& act, double u) {
    switch (act.kind) {
        case ActivationKind::Identity: return u;
        case ActivationKind::ReLU: return u > 0.0 ? u : 0.0;
        case ActivationKind::LeakyReLU: return u > 0.0 ? u : act.slope * u;
        case ActivationKind::Sigmoid: return sigmoid_scalar(u);
        case ActivationKind::Tanh: return std::tanh(u);
    }
    return u;
}

inline Matrix activation_apply(const Activation& act, const Matrix& a) {
    if (act.kind == ActivationKind::Identity) return a;
    Matrix out(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k)
        out.data()[k] = activation_apply(act, a.data()[k]);
    return out;
}

/// Derivative selection used by backprop and by the exhibited subgradient
/// elements; the kink of ReLU/LeakyReLU takes the left value.
inline double activation_subgrad(const Activation& act, double u) {
    switch (act.kind) {
        case ActivationKind::Identity: return 1.0;
        case ActivationKind::ReLU: return u > 0.0 ? 1.0 : 0.0;
        case ActivationKind::LeakyReLU: return u > 0.0 ? 1.0 : act.slope;
        case ActivationKind::Sigmoid: {
            const double s = sigmoid_scalar(u);
            return s * (1.0 - s);
        }
        case ActivationKind::Tanh: {
            const double t = std::tanh(u);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

/// Lipschitz constant of the activation valid on {|u| <= bound}.
inline double activation_local_lipschitz(const Activation& act, double bound) {
    if (!(bound > 0.0))
        throw std::invalid_argument("activation_local_lipschitz: bound must be positive");
    switch (act.kind) {
        case ActivationKind::Identity:
        case ActivationKind::ReLU:
        case ActivationKind::LeakyReLU:
        case ActivationKind::Tanh: return 1.0;
        case ActivationKind::Sigmoid: return 0.25;
    }
    return 1.0;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { Squared, Hinge, CrossEntropy };

namespace detail {
inline void require_loss_shapes(const Matrix& v, const Matrix& y, const char* op) {
    if (!v.same_shape(y))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + v.shape() + " vs " +
                                    y.shape());
}
inline double softplus(double u) {
    // log(1 + e^u), stable for large |u|
    return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}
}  // namespace detail

/// Empirical risk (1/n) sum_j loss(column j).
///   Squared:      (1/2)||u - y||^2 per column
///   Hinge:        sum_rows max{0, 1 - u*y} per column
///   CrossEntropy: elementwise sigmoid cross-entropy with a 1/d_out factor
inline double risk_value(LossKind loss, const Matrix& v, const Matrix& y) {
    detail::require_loss_shapes(v, y, "risk_value");
    const double n = static_cast<double>(v.cols());
    double total = 0.0;
    switch (loss) {
        case LossKind::Squared:
            total = 0.5 * fro_norm_sq_diff(v, y);
            break;
        case LossKind::Hinge:
            for (std::size_t k = 0; k < v.size(); ++k)
                total += std::max(0.0, 1.0 - v.data()[k] * y.data()[k]);
            break;
        case LossKind::CrossEntropy: {
            for (std::size_t k = 0; k < v.size(); ++k) {
                const double u = v.data()[k];
                const double t = y.data()[k];
                total += detail::softplus(u) - t * u;
            }
            total /= static_cast<double>(v.rows());
            break;
        }
    }
    return total / n;
}

/// Gradient of risk_value for the differentiable losses.
inline Matrix risk_gradient(LossKind loss, const Matrix& v, const Matrix& y) {
    detail::require_loss_shapes(v, y, "risk_gradient");
    if (loss == LossKind::Hinge)
        throw std::invalid_argument(
            "risk_gradient: hinge loss is not differentiable; use the proximal path");
    const double n = static_cast<double>(v.cols());
    Matrix g(v.rows(), v.cols());
    if (loss == LossKind::Squared) {
        for (std::size_t k = 0; k < v.size(); ++k)
            g.data()[k] = (v.data()[k] - y.data()[k]) / n;
    } else {
        const double scale = 1.0 / (n * static_cast<double>(v.rows()));
        for (std::size_t k = 0; k < v.size(); ++k)
            g.data()[k] = (sigmoid_scalar(v.data()[k]) - y.data()[k]) * scale;
    }
    return g;
}

/// Global Lipschitz constant of the risk gradient. Squared: 1/n.
/// CrossEntropy: 1/(4n), the per-coordinate sigmoid curvature bound 1/4
/// carried through the 1/n prefactor (deliberately not tightened by 1/d_out).
inline double risk_grad_lipschitz(LossKind loss, std::size_t n, std::size_t d_out) {
    (void)d_out;
    if (loss == LossKind::Hinge)
        throw std::invalid_argument("risk_grad_lipschitz: hinge loss has no gradient constant");
    const double nn = static_cast<double>(n);
    return loss == LossKind::Squared ? 1.0 / nn : 1.0 / (4.0 * nn);
}

// ---------------------------------------------------------------------------
// Regularizers
// ---------------------------------------------------------------------------

struct Regularizer {
    enum class Kind { None, SquaredFro, L1, ElasticNet, Nonneg, Box };

    Kind kind = Kind::None;
    double lambda1 = 0.0;  // L1 weight
    double lambda2 = 0.0;  // squared-Frobenius weight
    double lo = 0.0, hi = 1.0;

    static Regularizer none() { return {}; }
    static Regularizer squared_fro(double lambda) {
        require_positive(lambda, "squared_fro");
        Regularizer r;
        r.kind = Kind::SquaredFro;
        r.lambda2 = lambda;
        return r;
    }
    static Regularizer l1(double lambda) {
        require_positive(lambda, "l1");
        Regularizer r;
        r.kind = Kind::L1;
        r.lambda1 = lambda;
        return r;
    }
    static Regularizer elastic_net(double lambda1, double lambda2) {
        require_positive(lambda1, "elastic_net");
        require_positive(lambda2, "elastic_net");
        Regularizer r;
        r.kind = Kind::ElasticNet;
        r.lambda1 = lambda1;
        r.lambda2 = lambda2;
        return r;
    }
    static Regularizer nonneg() {
        Regularizer r;
        r.kind = Kind::Nonneg;
        return r;
    }
    static Regularizer box(double lo, double hi) {
        if (!(lo < hi))
            throw std::invalid_argument("box: need lo < hi");
        Regularizer r;
        r.kind = Kind::Box;
        r.lo = lo;
        r.hi = hi;
        return r;
    }

    bool is_none() const { return kind == Kind::None; }

    /// true when the regularizer folds into a normal-equation solve
    bool is_quadratic() const { return kind == Kind::None || kind == Kind::SquaredFro; }

    bool operator==(const Regularizer& o) const {
        return kind == o.kind && lambda1 == o.lambda1 && lambda2 == o.lambda2 && lo == o.lo &&
               hi == o.hi;
    }

private:
    static void require_positive(double v, const char* who) {
        if (!(v > 0.0))
            throw std::invalid_argument(std::string(who) + ": weight must be positive");
    }
};

inline double reg_value(const Regularizer& reg, const Matrix& a) {
    switch (reg.kind) {
        case Regularizer::Kind::None: return 0.0;
        case Regularizer::Kind::SquaredFro: return reg.lambda2 * fro_norm_sq(a);
        case Regularizer::Kind::L1: {
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a.data()[k]);
            return reg.lambda1 * s;
        }
        case Regularizer::Kind::ElasticNet: {
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a.data()[k]);
            return reg.lambda1 * s + reg.lambda2 * fro_norm_sq(a);
        }
        case Regularizer::Kind::Nonneg:
            for (std::size_t k = 0; k < a.size(); ++k)
                if (a.data()[k] < 0.0) return std::numeric_limits<double>::infinity();
            return 0.0;
        case Regularizer::Kind::Box:
            for (std::size_t k = 0; k < a.size(); ++k)
                if (a.data()[k] < reg.lo || a.data()[k] > reg.hi)
                    return std::numeric_limits<double>::infinity();
            return 0.0;
    }
    return 0.0;
}

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// argmin_x reg(x) + (rho/2)(x - c)^2, elementwise closed forms.
inline double reg_quad_argmin_scalar(const Regularizer& reg, double c, double rho) {
    switch (reg.kind) {
        case Regularizer::Kind::None: return c;
        case Regularizer::Kind::SquaredFro: return rho * c / (rho + 2.0 * reg.lambda2);
        case Regularizer::Kind::L1: return soft_threshold(c, reg.lambda1 / rho);
        case Regularizer::Kind::ElasticNet:
            // shrink, then scale
            return rho * soft_threshold(c, reg.lambda1 / rho) / (rho + 2.0 * reg.lambda2);
        case Regularizer::Kind::Nonneg: return std::max(c, 0.0);
        case Regularizer::Kind::Box: return std::clamp(c, reg.lo, reg.hi);
    }
    return c;
}

inline Matrix reg_quad_argmin(const Regularizer& reg, const Matrix& c, double rho) {
    if (!(rho > 0.0))
        throw std::invalid_argument("reg_quad_argmin: rho must be positive");
    if (reg.is_none()) return c;
    Matrix out(c.rows(), c.cols());
    for (std::size_t k = 0; k < c.size(); ++k)
        out.data()[k] = reg_quad_argmin_scalar(reg, c.data()[k], rho);
    return out;
}

// ---------------------------------------------------------------------------
// Scalar proximal solvers for the pre-activation blocks
// ---------------------------------------------------------------------------

/// Global minimizer of f(u) = (1/2)(max{0,u} - a)^2 + (gamma/2)(u - b)^2.
/// Four closed-form cases; ties on the boundary curves agree by continuity
/// and the first matching case wins.
inline double relu_quad_prox(double a, double b, double gamma) {
    const double gb = gamma * b;
    if (a + gb >= 0.0 && b >= 0.0) return (a + gb) / (1.0 + gamma);
    const double threshold = -(std::sqrt(gamma * (gamma + 1.0)) - gamma) * a;
    if (threshold <= gb && gb < 0.0) return (a + gb) / (1.0 + gamma);
    if (-a <= gb && gb <= threshold) return b;
    return std::min(b, 0.0);  // a + gamma*b < 0
}

/// Same problem with the leaky slope s in (0,1): each affine branch has a
/// quadratic minimum, clamp both into their branches and keep the better.
inline double leaky_relu_quad_prox(double slope, double a, double b, double gamma) {
    const double pos = std::max((a + gamma * b) / (1.0 + gamma), 0.0);
    const double neg = std::min((slope * a + gamma * b) / (slope * slope + gamma), 0.0);
    auto f = [&](double u) {
        const double s = (u > 0.0 ? u : slope * u) - a;
        const double d = u - b;
        return 0.5 * s * s + 0.5 * gamma * d * d;
    };
    return f(pos) <= f(neg) ? pos : neg;
}

/// Global minimizer of g(u) = max{0, 1 - a*u} + (gamma/2)(u - b)^2.
inline double hinge_prox(double a, double b, double gamma) {
    if (a == 0.0) return b;
    const double ab = a * b;
    if (ab <= 1.0 - a * a / gamma) return b + a / gamma;
    if (ab < 1.0) return 1.0 / a;
    return b;  // ab >= 1
}

/// argmin_u (1/2)(sigma(u) - v)^2 + (gamma_eff/2)(u - b)^2 for smooth sigma
/// (sigmoid or tanh). No closed form exists; a bracketed scan bounds the
/// minimizer via |u* - b| <= (1+|v|)/gamma_eff, then ternary refinement
/// polishes the three best brackets.
inline double smooth_scalar_quad_min(ActivationKind kind, double v, double b, double gamma_eff) {
    if (kind != ActivationKind::Sigmoid && kind != ActivationKind::Tanh)
        throw std::invalid_argument("smooth_scalar_quad_min: expects sigmoid or tanh");
    if (!(gamma_eff > 0.0))
        throw std::invalid_argument("smooth_scalar_quad_min: gamma_eff must be positive");
    const Activation act{kind, 0.0};
    auto f = [&](double u) {
        const double r = activation_apply(act, u) - v;
        const double d = u - b;
        return 0.5 * r * r + 0.5 * gamma_eff * d * d;
    };

    const double radius = (1.0 + std::abs(v)) / gamma_eff + 4.0;
    const double lo = b - radius, hi = b + radius;
    constexpr std::size_t kPoints = 2048;
    const double step = (hi - lo) / static_cast<double>(kPoints - 1);

    double best_val[3] = {std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity(),
                          std::numeric_limits<double>::infinity()};
    std::size_t best_idx[3] = {0, 0, 0};
    for (std::size_t i = 0; i < kPoints; ++i) {
        const double fi = f(lo + step * static_cast<double>(i));
        if (fi < best_val[0]) {
            best_val[2] = best_val[1]; best_idx[2] = best_idx[1];
            best_val[1] = best_val[0]; best_idx[1] = best_idx[0];
            best_val[0] = fi; best_idx[0] = i;
        } else if (fi < best_val[1]) {
            best_val[2] = best_val[1]; best_idx[2] = best_idx[1];
            best_val[1] = fi; best_idx[1] = i;
        } else if (fi < best_val[2]) {
            best_val[2] = fi; best_idx[2] = i;
        }
    }

    double arg = lo + step * static_cast<double>(best_idx[0]);
    double val = best_val[0];
    for (int c = 0; c < 3; ++c) {
        double l = lo + step * (static_cast<double>(best_idx[c]) - 1.0);
        double r = l + 2.0 * step;
        for (int it = 0; it < 200 && r - l > 1e-12; ++it) {
            const double m1 = l + (r - l) / 3.0;
            const double m2 = r - (r - l) / 3.0;
            if (f(m1) <= f(m2)) r = m2; else l = m1;
        }
        const double u = 0.5 * (l + r);
        const double fu = f(u);
        if (fu < val) {
            val = fu;
            arg = u;
        }
    }
    return arg;
}

}  // namespace bcdnet
