#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "semlp/data.hpp"
#include "semlp/error.hpp"
#include "test_helpers.hpp"

using namespace semlp;

namespace {

GeneratorConfig noise_free() {
    GeneratorConfig g;
    g.noise_enabled = false;
    return g;
}

} // namespace

TEST_SUITE("data") {
    TEST_CASE("grid has 108 conditions and 864 layer samples") {
        const GridSpec grid;
        const auto conditions = build_conditions(grid);
        CHECK(conditions.size() == 108);
        CHECK(conditions.front() == Condition{60, 900, 40, 7});
        CHECK(conditions[1].layer_count == 8);
        CHECK(conditions[4].layer_count == 6);
        const Dataset d = generate_dataset(grid, noise_free());
        CHECK(d.size() == 864);
        for (const LayerSample& s : d) {
            CHECK_NOTHROW(s.validate());
        }
    }

    TEST_CASE("surrogate values match the high-precision oracle") {
        const auto r = surrogate_response({94, 926, 40, 5}, noise_free());
        REQUIRE(r.size() == 5);
        CHECK(r[0].peak == doctest::Approx(33673.94926244795).epsilon(1e-12));
        CHECK(r[0].width == doctest::Approx(0.7775377969762419).epsilon(1e-12));
        CHECK(r[1].entry_velocity == doctest::Approx(811.9551309285701).epsilon(1e-12));
        CHECK(r[1].peak == doctest::Approx(27558.72283902103).epsilon(1e-12));
        CHECK(r[1].width == doctest::Approx(0.532049104124701).epsilon(1e-12));
        for (std::size_t k = 1; k < r.size(); ++k) {
            CHECK(r[k].entry_velocity < r[k - 1].entry_velocity);
        }
    }

    TEST_CASE("a projectile that stops early is a generation error naming the condition") {
        GeneratorConfig g = noise_free();
        g.peak_coefficient = 1.0;
        try {
            (void)surrogate_response({60, 900, 80, 10}, g);
            FAIL("expected GenerationError");
        } catch (const GenerationError& e) {
            CHECK(std::string(e.what()).find("900") != std::string::npos);
        }
    }

    TEST_CASE("noise is seeded, multiplicative and keeps targets positive") {
        GeneratorConfig g;
        g.seed = 11;
        const Dataset a = generate_dataset(GridSpec{}, g);
        const Dataset b = generate_dataset(GridSpec{}, g);
        CHECK(a == b);
        g.seed = 12;
        const Dataset c = generate_dataset(GridSpec{}, g);
        CHECK_FALSE(a == c);
        const Dataset clean = generate_dataset(GridSpec{}, noise_free());
        double log_sum = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].peak > 0.0);
            CHECK(a[i].width > 0.0);
            CHECK(a[i].condition == clean[i].condition);
            log_sum += std::log(a[i].peak / clean[i].peak);
        }
        // mean of 864 draws of N(0, 0.03^2) lies well within 5 sigma of zero
        CHECK(std::abs(log_sum / static_cast<double>(a.size())) < 5 * 0.03 / std::sqrt(864.0));
    }

    TEST_CASE("grid and condition validation") {
        CHECK_THROWS_AS(Condition({60, 2000, 40, 6}).validate(), DomainError);
        CHECK_THROWS_AS(Condition({60, 1000, 50, 6}).validate(), DomainError);
        CHECK_THROWS_AS(Condition({60, 1000, 40, 11}).validate(), DomainError);
        CHECK_NOTHROW(Condition({94, 926, 40, 5}).validate_physical(3));
        CHECK_THROWS_AS(Condition({94, 926, 40, 5}).validate_physical(6), DomainError);
        CHECK_THROWS_AS(Condition({-1, 926, 40, 5}).validate_physical(1), DomainError);
        CHECK_THROWS_AS(Condition({94, 0, 40, 5}).validate_physical(1), DomainError);
        GridSpec grid;
        grid.velocity_max = 2000;
        CHECK_THROWS_AS(grid.validate(), ConfigError);
        GeneratorConfig g;
        g.noise_sigma_peak = -0.1;
        CHECK_THROWS_AS(g.validate(), ConfigError);
    }

    TEST_CASE("norm params: spot value, ranges and round trip") {
        NormParams np;
        np.x_min = {60, 900, 40, 6, 1};
        np.x_max = {600, 1700, 80, 10, 10};
        np.log_max = std::log(62501.0);
        np.width_max = 0.83;
        CHECK(normalize_peak(33750, np) == doctest::Approx(0.9442021209139719).epsilon(1e-12));
        CHECK(normalize_width(0.77, np) == doctest::Approx(0.77 / 0.83));
        const auto back = denormalize_outputs(normalize_peak(33750, np), normalize_width(0.77, np), np);
        CHECK(back.peak == doctest::Approx(33750).epsilon(1e-12));
        CHECK(back.width == doctest::Approx(0.77).epsilon(1e-12));

        bool extrapolated = true;
        const auto f = normalize_features({60, 1700, 60, 8}, 1, np, &extrapolated);
        CHECK_FALSE(extrapolated);
        CHECK(f[0] == 0.0);
        CHECK(f[1] == 1.0);
        CHECK(f[2] == 0.5);
        (void)normalize_features({60, 2000, 60, 8}, 1, np, &extrapolated);
        CHECK(extrapolated);

        CHECK_THROWS_AS((void)normalize_peak(-1, np), DomainError);
        CHECK_THROWS_AS((void)normalize_width(-0.1, np), DomainError);
        CHECK_THROWS_AS((void)denormalize_outputs(0.5, 0.5, std::optional<NormParams>{}), StateError);
    }

    TEST_CASE("fit uses the given indices only and every fitted value lands in [0, 1]") {
        const Dataset d = generate_dataset(GridSpec{}, noise_free());
        const FoldSplit split = kfold_split(d.size(), 4, 3);
        const auto train = split.train_indices(0);
        const NormParams np = NormParams::fit(d, train);
        const DesignMatrices m = normalize_dataset(d, train, np);
        for (const double v : m.x.data()) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (const double v : m.y.data()) {
            CHECK(v > 0.0);
            CHECK(v <= 1.0);
        }
        const Dataset same = {d[0], d[0]};
        CHECK_THROWS_AS(NormParams::fit(same), NormalizationError);
    }

    TEST_CASE("k-fold partitions are disjoint, covering, balanced and seeded") {
        for (const std::size_t n : {864u, 10u, 7u}) {
            const FoldSplit s = kfold_split(n, 4, 42);
            std::set<std::size_t> seen;
            std::size_t lo = n;
            std::size_t hi = 0;
            for (std::size_t f = 0; f < s.k(); ++f) {
                lo = std::min(lo, s.folds[f].size());
                hi = std::max(hi, s.folds[f].size());
                for (const std::size_t i : s.folds[f]) {
                    CHECK(seen.insert(i).second);
                }
                CHECK(s.train_indices(f).size() + s.validation_indices(f).size() == n);
            }
            CHECK(seen.size() == n);
            CHECK(hi - lo <= 1);
        }
        CHECK(kfold_split(864, 4, 42).checksum() == kfold_split(864, 4, 42).checksum());
        CHECK(kfold_split(864, 4, 42).checksum() != kfold_split(864, 4, 43).checksum());
        CHECK_THROWS_AS(kfold_split(3, 4, 1), ConfigError);
        CHECK_THROWS_AS(kfold_split(10, 1, 1), ConfigError);
    }

    TEST_CASE("CSV round trip is exact") {
        const Dataset d = generate_dataset(GridSpec{}, GeneratorConfig{});
        std::stringstream ss;
        format_dataset(d, ss);
        CHECK(parse_dataset(ss) == d);
        test::TempDir dir("data");
        write_dataset(d, dir / "d.csv");
        CHECK(read_dataset(dir / "d.csv") == d);
    }

    TEST_CASE("CSV errors name the offending rows") {
        std::stringstream empty;
        CHECK_THROWS_AS(parse_dataset(empty), ParseError);

        std::stringstream bad_header("mass,velocity\n1,2\n");
        CHECK_THROWS_AS(parse_dataset(bad_header), ParseError);

        std::stringstream bad(std::string(kDatasetHeader) + "\n" + "60,900,40,6,1,30000,0.8\n" + "60,900,40,6,x,30000,0.8\n" +
                              "60,900,40,6,2,-5,0.8\n" + "60,900,40,6,3,30000,0.8\n");
        try {
            (void)parse_dataset(bad);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.rows() == std::vector<std::size_t>{2, 3});
        }
    }
}
