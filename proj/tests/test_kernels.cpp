#include <doctest.h>

#include <vector>

#include "semlp/kernels.hpp"
#include "test_helpers.hpp"

using semlp::Matrix;
using semlp::test::random_matrix;
namespace kr = semlp::kernels::reference;
namespace ko = semlp::kernels::omp;

namespace {

struct Shape {
    std::size_t batch;
    std::size_t in;
    std::size_t out;
};

// Small shapes stay below the fork threshold, large ones cross it.
const std::vector<Shape> kShapes = {{1, 1, 1}, {3, 5, 7}, {32, 64, 64}, {33, 5, 64}, {864, 64, 64}, {1000, 17, 129}};

} // namespace

TEST_SUITE("kernels") {
    TEST_CASE("affine matches a hand-computed product") {
        const Matrix x = Matrix::from_rows({{1, 2}, {3, 4}});
        const Matrix w = Matrix::from_rows({{1, 0}, {0.5, -1}, {2, 2}});
        const std::vector<double> b{0.1, 0.2, 0.3};
        Matrix y(2, 3);
        kr::affine(x, w, b, y);
        CHECK(y == Matrix::from_rows({{1.1, -1.3, 6.3}, {3.1, -2.3, 14.3}}));
    }

    TEST_CASE("omp kernels are bitwise identical to the serial reference") {
        std::uint64_t seed = 1;
        for (const Shape& s : kShapes) {
            CAPTURE(s.batch);
            CAPTURE(s.in);
            CAPTURE(s.out);
            const Matrix x = random_matrix(s.batch, s.in, seed++);
            const Matrix w = random_matrix(s.out, s.in, seed++);
            const Matrix g = random_matrix(s.batch, s.out, seed++);
            const Matrix b = random_matrix(1, s.out, seed++);

            Matrix y_ref(s.batch, s.out);
            Matrix y_omp(s.batch, s.out);
            kr::affine(x, w, b.data(), y_ref);
            ko::affine(x, w, b.data(), y_omp);
            CHECK(y_ref == y_omp);

            // Accumulation onto non-zero gradients exercises the += path too.
            Matrix gw_ref = random_matrix(s.out, s.in, seed);
            Matrix gw_omp = gw_ref;
            std::vector<double> gb_ref(s.out, 0.25);
            std::vector<double> gb_omp = gb_ref;
            kr::accumulate_affine_grads(x, g, gw_ref, gb_ref);
            ko::accumulate_affine_grads(x, g, gw_omp, gb_omp);
            CHECK(gw_ref == gw_omp);
            CHECK(gb_ref == gb_omp);

            Matrix dx_ref(s.batch, s.in);
            Matrix dx_omp(s.batch, s.in);
            kr::affine_input_grad(g, w, dx_ref);
            ko::affine_input_grad(g, w, dx_omp);
            CHECK(dx_ref == dx_omp);

            std::vector<double> m_ref(s.out), v_ref(s.out), m_omp(s.out), v_omp(s.out);
            kr::column_moments(g, m_ref, v_ref);
            ko::column_moments(g, m_omp, v_omp);
            CHECK(m_ref == m_omp);
            CHECK(v_ref == v_omp);
        }
    }

    TEST_CASE("adamw update is bitwise identical across implementations") {
        for (const std::size_t n : {std::size_t{7}, std::size_t{13000}, std::size_t{1} << 16}) {
            const Matrix p = random_matrix(1, n, n);
            const Matrix g = random_matrix(1, n, n + 1);
            std::vector<double> a(p.data().begin(), p.data().end());
            std::vector<double> b = a;
            std::vector<double> ma(n), va(n), mb(n), vb(n);
            semlp::kernels::AdamWHyper h;
            for (int t = 1; t <= 3; ++t) {
                h.bias_correction1 = 1.0 - std::pow(h.beta1, t);
                h.bias_correction2 = 1.0 - std::pow(h.beta2, t);
                kr::adamw_update(a, g.data(), ma, va, h);
                ko::adamw_update(b, g.data(), mb, vb, h);
            }
            CHECK(a == b);
            CHECK(ma == mb);
            CHECK(va == vb);
        }
    }

    TEST_CASE("column moments use the biased variance") {
        const Matrix x = Matrix::from_rows({{1, 10}, {2, 10}, {4, 10}});
        std::vector<double> mean(2), var(2);
        ko::column_moments(x, mean, var);
        CHECK(mean[0] == doctest::Approx(7.0 / 3.0).epsilon(1e-15));
        CHECK(var[0] == doctest::Approx(14.0 / 9.0).epsilon(1e-15));
        CHECK(var[1] == 0.0);
    }
}
