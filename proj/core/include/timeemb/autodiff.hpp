#pragma once

#include "timeemb/array.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace timeemb {

/// A trainable tensor with its gradient buffer.
struct Parameter {
    Parameter() = default;
    Parameter(std::string name_, RealArray value_)
        : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }

    std::string name;
    RealArray value;
    RealArray grad;
};

/// Reverse-mode differentiation over a closed set of primitives.
///
/// A Graph is built once per evaluation: every primitive computes its value
/// eagerly and records a backward closure. `backward()` walks the nodes in
/// reverse creation order, which is a valid topological order because a node
/// can only reference nodes created before it. Complex quantities are carried
/// as (re, im) pairs of real nodes.
class Graph {
public:
    struct Var {
        std::size_t id = static_cast<std::size_t>(-1);
    };
    struct CVar {
        Var re;
        Var im;
    };

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(RealArray value);
    // Binds a parameter; its gradient is accumulated into `p.grad` by backward().
    Var param(Parameter& p);

    const RealArray& value(Var v) const { return nodes_.at(v.id).value; }
    const RealArray& grad(Var v) const { return nodes_.at(v.id).grad; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t node_count() const noexcept { return nodes_.size(); }

    // y = x·Wᵀ + b for x: N×K, w: M×K, b: M (pass an invalid Var to omit b).
    Var affine(Var x, Var w, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var relu(Var a);
    Var square(Var a);
    Var abs(Var a);
    // Mean of all entries; returns a 1-element node.
    Var mean(Var a);
    // Elementwise |re + j·im|.
    Var modulus(CVar z);

    // Complex product of every row of z (R×F) with the length-F vector w.
    CVar complex_mul_rows(CVar z, CVar w);
    // Row-wise real transforms: R×L -> R×F and back.
    CVar rfft_rows(Var x);
    Var irfft_rows(CVar z, std::size_t length);

    // Looks up table[slot_b, :, c] (table: M×F×D) for each sample b and
    // channel c. Output row b·D + c holds F entries.
    Var gather_slots(Var table, std::span<const std::size_t> slots);

    // Seeds d(loss)/d(loss) = 1 and propagates. loss must hold one value.
    void backward(Var loss);

    // Hash of the activation pattern of every piecewise primitive (ReLU
    // sign, modulus zero-ness). Two evaluations with equal signatures lie on
    // the same smooth piece.
    std::uint64_t kink_signature() const noexcept { return signature_; }

private:
    struct Node {
        RealArray value;
        RealArray grad;
        std::function<void()> backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    Var push(RealArray value, bool requires_grad, const char* op);
    RealArray& grad_buffer(Var v);
    bool needs(Var v) const { return v.id != static_cast<std::size_t>(-1) && nodes_[v.id].requires_grad; }
    void link_pair(Var re, Var im);
    void mix_signature(std::uint64_t bits) noexcept;

    std::vector<Node> nodes_;
    std::uint64_t signature_ = 1469598103934665603ULL;
};

using ForwardFn = std::function<Graph::Var(Graph&)>;

/// Zeroes every parameter gradient, builds the graph, back-propagates from the
/// scalar it returns and leaves d(output)/d(param) in each `grad`. Returns the
/// scalar value.
double evaluate_with_gradients(std::span<Parameter* const> params, const ForwardFn& forward);

/// Forward only. Returns the scalar value and the kink signature.
std::pair<double, std::uint64_t> evaluate(const ForwardFn& forward);

struct GradCheckOptions {
    double step = 1e-6;
    // Denominators of the relative error are clamped to at least this value.
    double scale_floor = 1e-6;
    // Test hook run between the analytic pass and the comparison.
    std::function<void(std::span<Parameter* const>)> gradient_hook;
};

/// Compares analytic gradients with central differences for every entry of
/// every parameter. Entries whose ±step evaluations switch the piecewise
/// pattern (a ReLU or modulus crosses its kink) are excluded. Returns the
/// worst relative error per parameter name.
std::map<std::string, double> finite_difference_check(std::span<Parameter* const> params,
                                                      const ForwardFn& forward,
                                                      GradCheckOptions options = {});

} // namespace timeemb
