#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "stockloss/loss.hpp"

using namespace stockloss;

namespace {

// Relative error with an absolute floor so near-zero components do not
// amplify finite-difference noise.
double grad_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(std::abs(fd), 1e-4);
}

struct Instance {
    OutputVector outputs;
    SignalDelta delta;
};

Instance random_instance(std::mt19937_64& rng, int n, bool with_hold) {
    std::uniform_real_distribution<double> mag(0.05, 0.95);
    std::uniform_real_distribution<double> du(-0.05, 0.05);
    std::bernoulli_distribution flip(0.5);
    Instance inst;
    for (int i = 0; i < n; ++i) {
        const double m = mag(rng);
        inst.outputs.stock_outputs.push_back(flip(rng) ? -m : m);
        inst.delta.deltas.push_back(du(rng));
    }
    if (with_hold) {
        const double m = mag(rng);
        inst.outputs.hold_output = flip(rng) ? -m : m;
    }
    return inst;
}

}  // namespace

TEST_CASE("analytic gradients match central differences across every mode") {
    const LossVariant variants[] = {LossVariant::StockLoss, LossVariant::StockLossMax,
                                    LossVariant::StockLossL2,
                                    LossVariant::StockLossNorm};
    std::mt19937_64 rng(101);
    const double h = 1e-6;
    for (const LossVariant v : variants) {
        for (const bool smooth : {false, true}) {
            for (const bool hold : {false, true}) {
                for (const double gamma : {5.0, 10.0}) {
                    LossConfig cfg;
                    cfg.variant = v;
                    cfg.smooth = smooth;
                    cfg.use_hold = hold;
                    cfg.gamma = gamma;
                    for (int pt = 0; pt < 20; ++pt) {
                        const Instance inst = random_instance(rng, 6, hold);
                        const LossEvaluation ev =
                            evaluate_loss(inst.outputs, inst.delta, cfg);
                        const std::vector<double> fd = loss_gradient_fd(
                            evaluate_loss, inst.outputs, inst.delta, cfg, h);
                        REQUIRE(fd.size() == ev.gradient.size());
                        for (std::size_t k = 0; k < fd.size(); ++k) {
                            CAPTURE(static_cast<int>(v));
                            CAPTURE(smooth);
                            CAPTURE(hold);
                            CAPTURE(gamma);
                            CAPTURE(pt);
                            CAPTURE(k);
                            CHECK(grad_err(ev.gradient[k], fd[k]) < 1e-5);
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("kinked loss jumps by 2*delta*(S-|o1|)/S^2 when an output crosses zero") {
    // All deltas equal so the textbook jump formula is exact for this instance.
    const double d = 0.02;
    const SignalDelta delta{{d, d, d, d, d}};
    LossConfig cfg;
    cfg.variant = LossVariant::StockLoss;
    cfg.smooth = false;

    const double a = 1e-4;
    OutputVector right;
    right.stock_outputs = {a, 0.3, 0.4, 0.5, 0.6};
    OutputVector left = right;
    left.stock_outputs[0] = -a;

    const double h = 1e-5;
    const double g_right =
        loss_gradient_fd(evaluate_loss, right, delta, cfg, h)[0];
    const double g_left = loss_gradient_fd(evaluate_loss, left, delta, cfg, h)[0];
    const double measured = g_right - g_left;

    double s = 0.0;
    for (double x : right.stock_outputs) s += std::abs(x);
    const double expected = 2.0 * d * (s - a) / (s * s);
    CHECK(std::abs(measured - expected) / expected < 0.01);
    // The jump is a first-class feature, not numerical noise.
    CHECK(std::abs(measured) > 0.5 * d / s);

    // The smooth variant closes the gap: same probe, orders of magnitude smaller.
    cfg.smooth = true;
    const double sg_right =
        loss_gradient_fd(evaluate_loss, right, delta, cfg, h)[0];
    const double sg_left = loss_gradient_fd(evaluate_loss, left, delta, cfg, h)[0];
    CHECK(std::abs(sg_right - sg_left) < 0.05 * std::abs(measured));
}

TEST_CASE("smooth gradient is continuous through zero output") {
    LossConfig cfg;
    cfg.variant = LossVariant::StockLoss;
    cfg.smooth = true;
    const SignalDelta delta{{0.04, 0.02}};
    OutputVector o;
    o.stock_outputs = {0.0, 0.5};
    const LossEvaluation at0 = evaluate_loss(o, delta, cfg);
    o.stock_outputs[0] = 1e-9;
    const LossEvaluation just_right = evaluate_loss(o, delta, cfg);
    o.stock_outputs[0] = -1e-9;
    const LossEvaluation just_left = evaluate_loss(o, delta, cfg);
    CHECK(std::abs(just_right.gradient[0] - at0.gradient[0]) < 1e-6);
    CHECK(std::abs(just_left.gradient[0] - at0.gradient[0]) < 1e-6);
}

TEST_CASE("gradients stay finite when one stock dwarfs the rest") {
    LossConfig cfg;
    cfg.variant = LossVariant::StockLossNorm;
    cfg.smooth = true;
    OutputVector o;
    o.stock_outputs = {0.999, 1e-7, -1e-7};
    const SignalDelta delta{{1e-6, -1e-6, 1e-6}};
    const LossEvaluation ev = evaluate_loss(o, delta, cfg);
    CHECK(std::isfinite(ev.value));
    for (double g : ev.gradient) CHECK(std::isfinite(g));
}

TEST_CASE("hold reward is unscaled, so more hold magnitude always lowers L1") {
    // The hold fraction counts as full reward while stocks earn at most
    // |delta| per unit weight, so the descent direction always grows |hold|.
    LossConfig cfg;
    cfg.variant = LossVariant::StockLoss;
    cfg.smooth = true;
    cfg.use_hold = true;
    OutputVector o;
    o.stock_outputs = {0.5, 0.6};
    o.hold_output = 0.3;
    for (const SignalDelta& delta :
         {SignalDelta{{-0.03, -0.02}}, SignalDelta{{0.03, 0.02}}}) {
        CHECK(evaluate_loss(o, delta, cfg).gradient.back() < 0.0);
        OutputVector neg = o;
        neg.hold_output = -0.3;  // magnitude matters, raw sign sets direction
        CHECK(evaluate_loss(neg, delta, cfg).gradient.back() > 0.0);
    }
}
