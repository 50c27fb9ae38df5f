#include "timeemb/autodiff.hpp"

#include "timeemb/error.hpp"
#include "timeemb/spectral.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace timeemb {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_rank2(const RealArray& a, const char* op) {
    if (a.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a 2-D operand, got " + shape_string(a.shape()));
    }
}

} // namespace

Graph::Var Graph::push(RealArray value, bool requires_grad, const char* op) {
    if (!value.all_finite()) {
        throw NumericError(op, std::string("non-finite value produced by ") + op);
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

RealArray& Graph::grad_buffer(Var v) {
    auto& node = nodes_[v.id];
    if (node.grad.size() != node.value.size()) node.grad = RealArray(node.value.shape());
    return node.grad;
}

void Graph::link_pair(Var re, Var im) {
    // The pair's shared closure lives on `re`, which backward() reaches after
    // `im`; make sure it runs even when only `im` received a gradient.
    nodes_[im.id].backward = [this, re] { grad_buffer(re); };
}

void Graph::mix_signature(std::uint64_t bits) noexcept {
    signature_ ^= bits;
    signature_ *= 1099511628211ULL;
}

Graph::Var Graph::constant(RealArray value) { return push(std::move(value), false, "constant"); }

Graph::Var Graph::param(Parameter& p) {
    Var v = push(p.value, true, "param");
    nodes_[v.id].param = &p;
    return v;
}

Graph::Var Graph::affine(Var x, Var w, Var b) {
    const RealArray& xv = value(x);
    const RealArray& wv = value(w);
    require_rank2(xv, "affine");
    require_rank2(wv, "affine");
    const auto n = static_cast<Eigen::Index>(xv.dim(0));
    const auto k = static_cast<Eigen::Index>(xv.dim(1));
    const auto m = static_cast<Eigen::Index>(wv.dim(0));
    if (static_cast<Eigen::Index>(wv.dim(1)) != k) {
        throw DimensionError("affine: input " + shape_string(xv.shape()) + " vs weight " +
                             shape_string(wv.shape()));
    }
    const bool has_bias = b.id != static_cast<std::size_t>(-1);
    if (has_bias && value(b).size() != static_cast<std::size_t>(m)) {
        throw DimensionError("affine: bias length " + std::to_string(value(b).size()) +
                             " vs output width " + std::to_string(m));
    }

    RealArray y({static_cast<std::size_t>(n), static_cast<std::size_t>(m)});
    MutMap ym(y.data(), n, m);
    ym.noalias() = ConstMap(xv.data(), n, k) * ConstMap(wv.data(), m, k).transpose();
    if (has_bias) {
        const auto bias = Eigen::Map<const Eigen::RowVectorXd>(value(b).data(), m);
        ym.rowwise() += bias;
    }

    const bool rg = needs(x) || needs(w) || (has_bias && needs(b));
    Var out = push(std::move(y), rg, "affine");
    if (rg) {
        nodes_[out.id].backward = [this, x, w, b, out, n, k, m, has_bias] {
            const ConstMap gy(nodes_[out.id].grad.data(), n, m);
            if (needs(x)) {
                MutMap gx(grad_buffer(x).data(), n, k);
                gx.noalias() += gy * ConstMap(value(w).data(), m, k);
            }
            if (needs(w)) {
                MutMap gw(grad_buffer(w).data(), m, k);
                gw.noalias() += gy.transpose() * ConstMap(value(x).data(), n, k);
            }
            if (has_bias && needs(b)) {
                Eigen::Map<Eigen::RowVectorXd> gb(grad_buffer(b).data(), m);
                gb += gy.colwise().sum();
            }
        };
    }
    return out;
}

Graph::Var Graph::add(Var a, Var b) {
    require_same_shape(value(a).shape(), value(b).shape(), "add");
    RealArray y = value(a);
    const RealArray& bv = value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    const bool rg = needs(a) || needs(b);
    Var out = push(std::move(y), rg, "add");
    if (rg) {
        nodes_[out.id].backward = [this, a, b, out] {
            const RealArray& g = nodes_[out.id].grad;
            for (Var v : {a, b}) {
                if (!needs(v)) continue;
                RealArray& gv = grad_buffer(v);
                for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
            }
        };
    }
    return out;
}

Graph::Var Graph::sub(Var a, Var b) {
    require_same_shape(value(a).shape(), value(b).shape(), "sub");
    RealArray y = value(a);
    const RealArray& bv = value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
    const bool rg = needs(a) || needs(b);
    Var out = push(std::move(y), rg, "sub");
    if (rg) {
        nodes_[out.id].backward = [this, a, b, out] {
            const RealArray& g = nodes_[out.id].grad;
            if (needs(a)) {
                RealArray& ga = grad_buffer(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (needs(b)) {
                RealArray& gb = grad_buffer(b);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    }
    return out;
}

Graph::Var Graph::mul(Var a, Var b) {
    require_same_shape(value(a).shape(), value(b).shape(), "mul");
    RealArray y = value(a);
    const RealArray& bv = value(b);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    const bool rg = needs(a) || needs(b);
    Var out = push(std::move(y), rg, "mul");
    if (rg) {
        nodes_[out.id].backward = [this, a, b, out] {
            const RealArray& g = nodes_[out.id].grad;
            if (needs(a)) {
                RealArray& ga = grad_buffer(a);
                const RealArray& bv = value(b);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
            }
            if (needs(b)) {
                RealArray& gb = grad_buffer(b);
                const RealArray& av = value(a);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
            }
        };
    }
    return out;
}

Graph::Var Graph::scale(Var a, double factor) {
    RealArray y = value(a);
    for (double& v : y.storage()) v *= factor;
    const bool rg = needs(a);
    Var out = push(std::move(y), rg, "scale");
    if (rg) {
        nodes_[out.id].backward = [this, a, out, factor] {
            const RealArray& g = nodes_[out.id].grad;
            RealArray& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
        };
    }
    return out;
}

Graph::Var Graph::relu(Var a) {
    RealArray y = value(a);
    std::uint64_t active = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool on = y[i] > 0.0;
        if (!on) y[i] = 0.0;
        active = active * 31 + (on ? i + 1 : 0);
    }
    mix_signature(active);
    const bool rg = needs(a);
    Var out = push(std::move(y), rg, "relu");
    if (rg) {
        nodes_[out.id].backward = [this, a, out] {
            const RealArray& g = nodes_[out.id].grad;
            const RealArray& av = value(a);
            RealArray& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (av[i] > 0.0) ga[i] += g[i];
            }
        };
    }
    return out;
}

Graph::Var Graph::square(Var a) {
    RealArray y = value(a);
    for (double& v : y.storage()) v *= v;
    const bool rg = needs(a);
    Var out = push(std::move(y), rg, "square");
    if (rg) {
        nodes_[out.id].backward = [this, a, out] {
            const RealArray& g = nodes_[out.id].grad;
            const RealArray& av = value(a);
            RealArray& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * av[i] * g[i];
        };
    }
    return out;
}

Graph::Var Graph::abs(Var a) {
    RealArray y = value(a);
    std::uint64_t pattern = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        pattern = pattern * 31 + (y[i] > 0.0 ? 1 : (y[i] < 0.0 ? 2 : 3));
        y[i] = std::abs(y[i]);
    }
    mix_signature(pattern);
    const bool rg = needs(a);
    Var out = push(std::move(y), rg, "abs");
    if (rg) {
        nodes_[out.id].backward = [this, a, out] {
            const RealArray& g = nodes_[out.id].grad;
            const RealArray& av = value(a);
            RealArray& ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (av[i] > 0.0) ga[i] += g[i];
                else if (av[i] < 0.0) ga[i] -= g[i];
            }
        };
    }
    return out;
}

Graph::Var Graph::mean(Var a) {
    const RealArray& av = value(a);
    if (av.empty()) throw DimensionError("mean: empty operand");
    double acc = 0.0;
    for (double v : av.values()) acc += v;
    const double n = static_cast<double>(av.size());
    const bool rg = needs(a);
    Var out = push(RealArray::scalar(acc / n), rg, "mean");
    if (rg) {
        nodes_[out.id].backward = [this, a, out, n] {
            const double g = nodes_[out.id].grad[0] / n;
            for (double& v : grad_buffer(a).storage()) v += g;
        };
    }
    return out;
}

Graph::Var Graph::modulus(CVar z) {
    require_same_shape(value(z.re).shape(), value(z.im).shape(), "modulus");
    const RealArray& re = value(z.re);
    const RealArray& im = value(z.im);
    RealArray y(re.shape());
    std::uint64_t zeros = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = std::hypot(re[i], im[i]);
        if (y[i] == 0.0) zeros = zeros * 31 + i + 1;
    }
    mix_signature(zeros);
    const bool rg = needs(z.re) || needs(z.im);
    Var out = push(std::move(y), rg, "modulus");
    if (rg) {
        nodes_[out.id].backward = [this, z, out] {
            const RealArray& g = nodes_[out.id].grad;
            const RealArray& m = nodes_[out.id].value;
            const RealArray& re = value(z.re);
            const RealArray& im = value(z.im);
            // Subgradient 0 at the origin.
            if (needs(z.re)) {
                RealArray& gr = grad_buffer(z.re);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (m[i] > 0.0) gr[i] += g[i] * re[i] / m[i];
                }
            }
            if (needs(z.im)) {
                RealArray& gi = grad_buffer(z.im);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (m[i] > 0.0) gi[i] += g[i] * im[i] / m[i];
                }
            }
        };
    }
    return out;
}

Graph::CVar Graph::complex_mul_rows(CVar z, CVar w) {
    const RealArray& zr = value(z.re);
    const RealArray& zi = value(z.im);
    const RealArray& wr = value(w.re);
    const RealArray& wi = value(w.im);
    require_rank2(zr, "complex_mul_rows");
    require_same_shape(zr.shape(), zi.shape(), "complex_mul_rows");
    require_same_shape(wr.shape(), wi.shape(), "complex_mul_rows filter");
    const std::size_t rows = zr.dim(0);
    const std::size_t f = zr.dim(1);
    if (wr.size() != f) {
        throw DimensionError("complex_mul_rows: filter length " + std::to_string(wr.size()) +
                             " vs " + std::to_string(f) + " bins");
    }
    RealArray yr(zr.shape()), yi(zr.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < f; ++k) {
            const std::size_t i = r * f + k;
            yr[i] = zr[i] * wr[k] - zi[i] * wi[k];
            yi[i] = zr[i] * wi[k] + zi[i] * wr[k];
        }
    }
    const bool rg = needs(z.re) || needs(z.im) || needs(w.re) || needs(w.im);
    Var out_re = push(std::move(yr), rg, "complex_mul_rows");
    Var out_im = push(std::move(yi), rg, "complex_mul_rows");
    if (rg) {
        link_pair(out_re, out_im);
        nodes_[out_re.id].backward = [this, z, w, out_re, out_im, rows, f] {
            const RealArray& g_re = nodes_[out_re.id].grad;
            const RealArray& g_im = grad_buffer(out_im);
            const RealArray& zr = value(z.re);
            const RealArray& zi = value(z.im);
            const RealArray& wr = value(w.re);
            const RealArray& wi = value(w.im);
            if (needs(z.re)) {
                RealArray& g = grad_buffer(z.re);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < f; ++k) {
                        const std::size_t i = r * f + k;
                        g[i] += g_re[i] * wr[k] + g_im[i] * wi[k];
                    }
            }
            if (needs(z.im)) {
                RealArray& g = grad_buffer(z.im);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < f; ++k) {
                        const std::size_t i = r * f + k;
                        g[i] += -g_re[i] * wi[k] + g_im[i] * wr[k];
                    }
            }
            if (needs(w.re)) {
                RealArray& g = grad_buffer(w.re);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < f; ++k) {
                        const std::size_t i = r * f + k;
                        g[k] += g_re[i] * zr[i] + g_im[i] * zi[i];
                    }
            }
            if (needs(w.im)) {
                RealArray& g = grad_buffer(w.im);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t k = 0; k < f; ++k) {
                        const std::size_t i = r * f + k;
                        g[k] += -g_re[i] * zi[i] + g_im[i] * zr[i];
                    }
            }
        };
    }
    return {out_re, out_im};
}

Graph::CVar Graph::rfft_rows(Var x) {
    const RealArray& xv = value(x);
    require_rank2(xv, "rfft_rows");
    const std::size_t rows = xv.dim(0);
    const std::size_t length = xv.dim(1);
    const RealFft& fft = real_fft(length);
    const std::size_t f = fft.bins();
    RealArray re({rows, f}), im({rows, f});
    for (std::size_t r = 0; r < rows; ++r) {
        fft.forward(std::span(xv.data() + r * length, length), std::span(re.data() + r * f, f),
                    std::span(im.data() + r * f, f));
    }
    const bool rg = needs(x);
    Var out_re = push(std::move(re), rg, "rfft_rows");
    Var out_im = push(std::move(im), rg, "rfft_rows");
    if (rg) {
        link_pair(out_re, out_im);
        nodes_[out_re.id].backward = [this, x, out_re, out_im, rows, length, f] {
            // Adjoint of the forward map: Re Σ_k G_k e^{+j2πkn/L}, evaluated
            // as L·irfft with interior bins halved to undo the Hermitian
            // doubling inside the inverse.
            const RealArray& g_re = grad_buffer(out_re);
            const RealArray& g_im = grad_buffer(out_im);
            const RealFft& fft = real_fft(length);
            RealArray& gx = grad_buffer(x);
            std::vector<double> re(f), im(f), col(length);
            const std::size_t last_interior = fft.has_nyquist() ? f - 1 : f;
            const double l = static_cast<double>(length);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t k = 0; k < f; ++k) {
                    const double w = (k == 0 || k >= last_interior) ? 1.0 : 0.5;
                    re[k] = g_re[r * f + k] * w;
                    im[k] = g_im[r * f + k] * w;
                }
                fft.inverse(re, im, col);
                for (std::size_t n = 0; n < length; ++n) gx[r * length + n] += col[n] * l;
            }
        };
    }
    return {out_re, out_im};
}

Graph::Var Graph::irfft_rows(CVar z, std::size_t length) {
    const RealArray& zr = value(z.re);
    const RealArray& zi = value(z.im);
    require_rank2(zr, "irfft_rows");
    require_same_shape(zr.shape(), zi.shape(), "irfft_rows");
    const RealFft& fft = real_fft(length);
    const std::size_t rows = zr.dim(0);
    const std::size_t f = fft.bins();
    if (zr.dim(1) != f) {
        throw DimensionError("irfft_rows: " + std::to_string(zr.dim(1)) + " bins for length " +
                             std::to_string(length));
    }
    RealArray y({rows, length});
    for (std::size_t r = 0; r < rows; ++r) {
        fft.inverse(std::span(zr.data() + r * f, f), std::span(zi.data() + r * f, f),
                    std::span(y.data() + r * length, length));
    }
    const bool rg = needs(z.re) || needs(z.im);
    Var out = push(std::move(y), rg, "irfft_rows");
    if (rg) {
        nodes_[out.id].backward = [this, z, out, rows, length, f] {
            // Adjoint: (w_k/L)·rfft(g) with w = 2 on interior bins. The
            // imaginary parts of DC/Nyquist are ignored by the inverse and
            // receive exactly zero.
            const RealArray& g = nodes_[out.id].grad;
            const RealFft& fft = real_fft(length);
            std::vector<double> re(f), im(f);
            const std::size_t last_interior = fft.has_nyquist() ? f - 1 : f;
            const double l = static_cast<double>(length);
            RealArray* gr = needs(z.re) ? &grad_buffer(z.re) : nullptr;
            RealArray* gi = needs(z.im) ? &grad_buffer(z.im) : nullptr;
            for (std::size_t r = 0; r < rows; ++r) {
                fft.forward(std::span(g.data() + r * length, length), re, im);
                for (std::size_t k = 0; k < f; ++k) {
                    const double w = ((k == 0 || k >= last_interior) ? 1.0 : 2.0) / l;
                    if (gr) (*gr)[r * f + k] += re[k] * w;
                    if (gi) (*gi)[r * f + k] += im[k] * w;
                }
            }
        };
    }
    return out;
}

Graph::Var Graph::gather_slots(Var table, std::span<const std::size_t> slots) {
    const RealArray& tv = value(table);
    if (tv.rank() != 3) throw DimensionError("gather_slots: table must be M×F×D");
    const std::size_t m = tv.dim(0);
    const std::size_t f = tv.dim(1);
    const std::size_t d = tv.dim(2);
    const std::size_t batch = slots.size();
    RealArray y({batch * d, f});
    for (std::size_t b = 0; b < batch; ++b) {
        if (slots[b] >= m) {
            throw DimensionError("gather_slots: slot " + std::to_string(slots[b]) + " outside bank of " +
                                 std::to_string(m));
        }
        const double* src = tv.data() + slots[b] * f * d;
        for (std::size_t c = 0; c < d; ++c)
            for (std::size_t k = 0; k < f; ++k) y[(b * d + c) * f + k] = src[k * d + c];
    }
    const bool rg = needs(table);
    Var out = push(std::move(y), rg, "gather_slots");
    if (rg) {
        std::vector<std::size_t> slot_copy(slots.begin(), slots.end());
        nodes_[out.id].backward = [this, table, out, slot_copy = std::move(slot_copy), f, d] {
            const RealArray& g = nodes_[out.id].grad;
            RealArray& gt = grad_buffer(table);
            for (std::size_t b = 0; b < slot_copy.size(); ++b) {
                double* dst = gt.data() + slot_copy[b] * f * d;
                for (std::size_t c = 0; c < d; ++c)
                    for (std::size_t k = 0; k < f; ++k) dst[k * d + c] += g[(b * d + c) * f + k];
            }
        };
    }
    return out;
}

void Graph::backward(Var loss) {
    if (value(loss).size() != 1) {
        throw ContractError("backward: terminal node is not scalar (shape " +
                            shape_string(value(loss).shape()) + ")");
    }
    if (!nodes_[loss.id].requires_grad) return;
    grad_buffer(loss)[0] = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.requires_grad || node.grad.size() != node.value.size()) continue;
        if (node.backward) node.backward();
        if (node.param) {
            Parameter& p = *node.param;
            require_same_shape(p.grad.shape(), node.grad.shape(), "parameter gradient");
            for (std::size_t i = 0; i < node.grad.size(); ++i) p.grad[i] += node.grad[i];
        }
    }
    for (const Node& node : nodes_) {
        if (node.param && !node.param->grad.all_finite()) {
            throw NumericError("backward", "non-finite gradient for parameter " + node.param->name);
        }
    }
}

double evaluate_with_gradients(std::span<Parameter* const> params, const ForwardFn& forward) {
    for (Parameter* p : params) {
        if (p->grad.shape() != p->value.shape()) p->grad = RealArray(p->value.shape());
        p->zero_grad();
    }
    Graph g;
    Graph::Var out = forward(g);
    g.backward(out);
    return g.value(out)[0];
}

std::pair<double, std::uint64_t> evaluate(const ForwardFn& forward) {
    Graph g;
    Graph::Var out = forward(g);
    if (g.value(out).size() != 1) {
        throw ContractError("evaluate: terminal node is not scalar");
    }
    return {g.value(out)[0], g.kink_signature()};
}

std::map<std::string, double> finite_difference_check(std::span<Parameter* const> params,
                                                      const ForwardFn& forward,
                                                      GradCheckOptions options) {
    if (!(options.step > 0.0)) throw ConfigError("finite_difference_check: step must be positive");
    evaluate_with_gradients(params, forward);
    if (options.gradient_hook) options.gradient_hook(params);
    const std::uint64_t base_signature = evaluate(forward).second;

    std::map<std::string, double> worst;
    for (Parameter* p : params) {
        double& group = worst[p->name];
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double original = p->value[i];
            p->value[i] = original + options.step;
            const auto [f_plus, sig_plus] = evaluate(forward);
            p->value[i] = original - options.step;
            const auto [f_minus, sig_minus] = evaluate(forward);
            p->value[i] = original;
            if (sig_plus != base_signature || sig_minus != base_signature) continue;

            const double numeric = (f_plus - f_minus) / (2.0 * options.step);
            const double analytic = p->grad[i];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), options.scale_floor});
            group = std::max(group, std::abs(numeric - analytic) / denom);
        }
    }
    return worst;
}

} // namespace timeemb
