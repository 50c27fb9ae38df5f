#include "pattern.hpp"

#include "timeemb/autodiff.hpp"
#include "timeemb/error.hpp"
#include "timeemb/optim.hpp"

#include <doctest.h>

#include <limits>

using namespace timeemb;
using timeemb::test::gaussian;
using timeemb::test::pattern;

namespace {

double worst(const std::map<std::string, double>& errors) {
    double w = 0.0;
    for (const auto& [name, e] : errors) w = std::max(w, e);
    return w;
}

GradCheckOptions tight() {
    GradCheckOptions o;
    o.step = 1e-5;
    o.scale_floor = 1e-4;
    return o;
}

} // namespace

TEST_CASE("elementwise and affine primitives pass the finite-difference check") {
    Parameter x("x", gaussian({4, 5}, 1));
    Parameter w("w", gaussian({3, 5}, 2));
    Parameter b("b", gaussian({3}, 3));
    Parameter y("y", gaussian({4, 3}, 4));
    std::vector<Parameter*> ps{&x, &w, &b, &y};
    const ForwardFn f = [&](Graph& g) {
        const auto a = g.affine(g.param(x), g.param(w), g.param(b));
        const auto r = g.relu(a);
        const auto m = g.mul(r, g.param(y));
        const auto s = g.sub(g.add(m, g.scale(a, -0.3)), g.param(y));
        return g.mean(g.add(g.square(s), g.abs(a)));
    };
    CHECK(worst(finite_difference_check(ps, f, tight())) < 1e-6);
}

TEST_CASE("spectral primitives pass the finite-difference check") {
    for (std::size_t l : {7u, 8u}) {
        const std::size_t f = l / 2 + 1;
        Parameter x("x", gaussian({3, l}, 10 + l));
        Parameter wr("wr", gaussian({f}, 20 + l));
        Parameter wi("wi", gaussian({f}, 30 + l));
        Parameter table("table", gaussian({2, f, 3}, 40 + l));
        const std::vector<std::size_t> slots{1};
        std::vector<Parameter*> ps{&x, &wr, &wi, &table};
        const ForwardFn fn = [&](Graph& g) {
            const auto z = g.rfft_rows(g.param(x));
            const auto shifted = Graph::CVar{g.sub(z.re, g.gather_slots(g.param(table), slots)), z.im};
            const auto prod = g.complex_mul_rows(shifted, {g.param(wr), g.param(wi)});
            const auto back = g.irfft_rows(prod, l);
            return g.add(g.mean(g.square(back)), g.mean(g.modulus(prod)));
        };
        CHECK(worst(finite_difference_check(ps, fn, tight())) < 1e-6);
    }
}

TEST_CASE("gather_slots accumulates gradients of repeated slots") {
    Parameter table("table", pattern({3, 2, 2}, 0.5));
    const std::vector<std::size_t> slots{2, 0, 2};
    std::vector<Parameter*> ps{&table};
    evaluate_with_gradients(ps, [&](Graph& g) {
        const auto rows = g.gather_slots(g.param(table), slots);
        CHECK(g.value(rows).shape() == Shape{6, 2});
        // Row b·D + c holds table[slot_b, :, c].
        CHECK(g.value(rows).at(1, 1) == table.value[(2 * 2 + 1) * 2 + 1]);
        return g.mean(rows);
    });
    const double unit = 1.0 / 12.0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(table.grad[i] == doctest::Approx(unit));       // slot 0, once
        CHECK(table.grad[4 + i] == 0.0);                     // slot 1, never
        CHECK(table.grad[8 + i] == doctest::Approx(2 * unit));  // slot 2, twice
    }
}

TEST_CASE("modulus uses a zero subgradient at the origin") {
    Parameter re("re", RealArray({2}, std::vector<double>{0.0, 3.0}));
    Parameter im("im", RealArray({2}, std::vector<double>{0.0, 4.0}));
    std::vector<Parameter*> ps{&re, &im};
    const double v = evaluate_with_gradients(ps, [&](Graph& g) { return g.mean(g.modulus({g.param(re), g.param(im)})); });
    CHECK(v == doctest::Approx(2.5));
    CHECK(re.grad[0] == 0.0);
    CHECK(im.grad[0] == 0.0);
    CHECK(re.grad[1] == doctest::Approx(0.3));
    CHECK(im.grad[1] == doctest::Approx(0.4));
}

TEST_CASE("kink signature tracks the ReLU activation pattern") {
    Parameter x("x", RealArray({2}, std::vector<double>{1.0, -1.0}));
    const ForwardFn f = [&](Graph& g) { return g.mean(g.relu(g.param(x))); };
    const auto base = evaluate(f).second;
    x.value[1] = -0.5;
    CHECK(evaluate(f).second == base);
    x.value[1] = 0.5;
    CHECK(evaluate(f).second != base);
}

TEST_CASE("gradients only reach what was used and are reset per evaluation") {
    Parameter used("used", RealArray({2}, 1.0));
    Parameter unused("unused", RealArray({2}, 1.0));
    std::vector<Parameter*> ps{&used, &unused};
    unused.grad.fill(7.0);
    evaluate_with_gradients(ps, [&](Graph& g) { return g.mean(g.scale(g.param(used), 3.0)); });
    CHECK(used.grad[0] == doctest::Approx(1.5));
    CHECK(unused.grad[0] == 0.0);
}

TEST_CASE("autodiff contract violations") {
    Graph g;
    const auto v = g.constant(RealArray({2}, 1.0));
    CHECK_THROWS_AS(g.backward(v), ContractError);
    CHECK_THROWS_AS(g.add(v, g.constant(RealArray({3}, 1.0))), DimensionError);
    CHECK_THROWS_AS(evaluate([](Graph& gr) { return gr.constant(RealArray({2}, 0.0)); }), ContractError);

    RealArray nan({1}, std::numeric_limits<double>::quiet_NaN());
    try {
        g.constant(nan);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.primitive() == "constant");
    }
    Parameter p("p", RealArray({1}, 1e300));
    std::vector<Parameter*> ps{&p};
    CHECK_THROWS_AS(evaluate_with_gradients(ps, [&](Graph& gr) { return gr.mean(gr.square(gr.param(p))); }),
                    NumericError);
}

TEST_CASE("Adam matches a reference implementation over two steps") {
    Parameter p("p", pattern({4}, 0.2));
    std::vector<Parameter*> ps{&p};
    AdamState state;
    state.options.learning_rate = 0.01;
    state.initialize(ps);
    for (double phase : {0.6, 1.7}) {
        p.grad = pattern({4}, phase);
        adam_step(ps, state);
    }
    const std::vector<double> expected{0.17888773872108729, 0.51962066186935763, 0.78786087272059535,
                                       0.94749489076033255};
    for (std::size_t i = 0; i < 4; ++i) CHECK(p.value[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    CHECK(state.step == 2);
    CHECK(p.grad[0] == 0.0);
}

TEST_CASE("Adam rejects an uninitialized or mismatched state") {
    Parameter p("p", RealArray({2}, 0.0));
    Parameter q("q", RealArray({2}, 0.0));
    std::vector<Parameter*> one{&p};
    std::vector<Parameter*> two{&p, &q};
    AdamState state;
    CHECK_THROWS_AS(adam_step(one, state), ContractError);
    state.initialize(one);
    CHECK_THROWS_AS(adam_step(two, state), ContractError);
}

TEST_CASE("zero gradients leave parameters untouched under Adam") {
    Parameter p("p", pattern({3}, 0.1));
    const RealArray before = p.value;
    std::vector<Parameter*> ps{&p};
    AdamState state;
    state.initialize(ps);
    adam_step(ps, state);
    CHECK(p.value == before);
}
