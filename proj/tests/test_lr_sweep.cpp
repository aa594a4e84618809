#include <doctest.h>

#include "qos/evaluation.hpp"
#include "qos/synthetic.hpp"

using namespace qos;

// Desk-scale learning-rate sweep at the default schedule (batch 256, 1500
// epochs) with informative synthetic features.
TEST_CASE("learning rate 1e-4 is no worse than 1e-5 or 1e-3") {
    SyntheticSpec spec;
    spec.seed = 1;
    const auto data = make_synthetic(spec);
    SweepSpec sweep;
    sweep.axis = SweepAxis::learning_rate;
    sweep.values = {1e-5, 1e-4, 1e-3};
    sweep.base.variant = Variant::phi3mini;
    sweep.base.train = TrainConfig::defaults_for(QosKind::throughput);
    const auto r = run_sweep(sweep, data.matrix, {&data.user_features, &data.service_features});
    REQUIRE(r.points.size() == 3);
    const double slow = r.points[0].report.mae, mid = r.points[1].report.mae, fast = r.points[2].report.mae;
    MESSAGE("MAE at 1e-5, 1e-4, 1e-3: " << slow << ", " << mid << ", " << fast);
    CHECK(r.points[1].mae_change == 0.0);
    CHECK(mid <= slow);
    CHECK(mid <= fast);
}
