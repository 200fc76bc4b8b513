#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "semlp/error.hpp"
#include "semlp/gradcheck.hpp"
#include "semlp/layers.hpp"

using namespace semlp;

TEST_SUITE("gradcheck") {
    TEST_CASE("finite differences of a quadratic are exact and restore the parameters") {
        std::vector<double> p{1.0, -2.0, 0.5};
        const auto loss = [&] { return p[0] * p[0] + 3.0 * p[1] * p[1] + p[0] * p[2]; };
        const auto g = finite_difference_grad(loss, p, 1e-4);
        CHECK(g[0] == doctest::Approx(2.0 + 0.5).epsilon(1e-9));
        CHECK(g[1] == doctest::Approx(-12.0).epsilon(1e-9));
        CHECK(g[2] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p == std::vector<double>{1.0, -2.0, 0.5});
    }

    TEST_CASE("relative error is norm-wise with a floor") {
        const std::vector<double> a{3.0, 4.0};
        const std::vector<double> n{3.0, 4.0 + 5e-3};
        CHECK(relative_error(a, n) == doctest::Approx(5e-3 / std::hypot(3.0, 4.005)));
        const std::vector<double> zero{0.0, 0.0};
        const std::vector<double> roundoff{1e-12, -1e-12};
        CHECK(relative_error(zero, roundoff) < 1e-5);
        CHECK(relative_error(zero, zero) == 0.0);
        CHECK_THROWS_AS((void)relative_error(a, std::vector<double>{1.0}), DimensionError);
    }

    TEST_CASE("healthy layers pass, with frozen and with live batch statistics") {
        GradcheckOptions opt;
        opt.seeds = 3;
        const GradcheckReport frozen = run_gradcheck(opt);
        CHECK(frozen.passed);
        CHECK(frozen.layers.size() == 9);
        CHECK(frozen.worst_relative_error < 1e-4);
        opt.freeze_batch_stats = false;
        const GradcheckReport live = run_gradcheck(opt);
        CHECK(live.passed);
    }

    TEST_CASE("a corrupted GELU derivative is caught and named") {
        GradcheckOptions opt;
        opt.seeds = 2;
        opt.gelu_backward = [](const Matrix& pre, const Matrix& grad_out) {
            Matrix g = gelu_backward(pre, grad_out);
            for (double& v : g.data()) {
                v *= 1.01;
            }
            return g;
        };
        const GradcheckReport r = run_gradcheck(opt);
        CHECK_FALSE(r.passed);
        for (const LayerCheck& c : r.layers) {
            CHECK(c.passed == (c.layer != "gelu"));
        }
        const auto gelu = std::find_if(r.layers.begin(), r.layers.end(), [](const LayerCheck& c) { return c.layer == "gelu"; });
        REQUIRE(gelu != r.layers.end());
        CHECK(gelu->worst_parameter.find("input seed") == 0);
    }
}
