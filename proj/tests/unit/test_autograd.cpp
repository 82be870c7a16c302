#include "doctest.h"
#include "test_support.hpp"

using namespace corefdre;
using namespace corefdre::testing;

namespace {

struct Fixture {
  Rng rng{42};
  ParameterStore store;
  Parameter& a = store.add("a", random_matrix(rng, 3, 4));
  Parameter& b = store.add("b", random_matrix(rng, 4, 2));
  Parameter& c = store.add("c", random_matrix(rng, 3, 4));
  Parameter& row = store.add("row", random_matrix(rng, 1, 4));
  Parameter& col = store.add("col", random_matrix(rng, 3, 1));

  std::vector<Parameter*> all() { return {&a, &b, &c, &row, &col}; }
};

// Projects any matrix to a scalar with fixed, non-uniform weights so that
// every output entry influences the result differently.
Var weighted_sum(Tape&, Var x) {
  Matrix w(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 + 0.17 * static_cast<double>(i % 7);
  return sum(mul_const(x, w));
}

void expect_gradients(Fixture& f, const std::function<Var(Tape&)>& fn) {
  const GradCheck r = check_gradients(f.all(), fn);
  INFO(r.worst);
  CHECK(r.max_relative_error <= 1e-6);
}

}  // namespace

TEST_CASE("elementwise and matrix ops match finite differences") {
  Fixture f;
  SUBCASE("matmul / transpose") {
    expect_gradients(f, [&](Tape& t) { return weighted_sum(t, matmul(t.param(f.a), t.param(f.b))); });
    expect_gradients(f, [&](Tape& t) { return weighted_sum(t, transpose(t.param(f.a))); });
  }
  SUBCASE("add / sub / mul / scale") {
    expect_gradients(f, [&](Tape& t) {
      Var x = add(t.param(f.a), mul(t.param(f.a), t.param(f.c)));
      return weighted_sum(t, scale(sub(x, t.param(f.c)), -1.5));
    });
  }
  SUBCASE("add_row / repeat_rows / mean_rows / row_sum") {
    expect_gradients(f, [&](Tape& t) {
      Var x = add_row(t.param(f.a), t.param(f.row));
      return add(weighted_sum(t, mean_rows(x)),
                 add(weighted_sum(t, row_sum(x)), weighted_sum(t, repeat_rows(t.param(f.row), 5))));
    });
  }
  SUBCASE("smooth nonlinearities") {
    expect_gradients(f, [&](Tape& t) {
      Var x = t.param(f.a);
      return add(weighted_sum(t, sigmoid(x)), add(weighted_sum(t, tanh(x)), weighted_sum(t, square(x))));
    });
  }
  SUBCASE("relu and abs away from the kink") {
    expect_gradients(f, [&](Tape& t) {
      Var x = t.param(f.c);
      return add(weighted_sum(t, relu(x)), weighted_sum(t, corefdre::abs(x)));
    });
  }
  SUBCASE("concat / slice / gather") {
    expect_gradients(f, [&](Tape& t) {
      Var x = concat_cols({t.param(f.a), t.param(f.col)});
      Var y = concat_rows(std::vector<Var>{t.param(f.c), t.param(f.row)});
      std::vector<int> rows = {2, 0, 2, 3};
      return add(weighted_sum(t, slice_cols(x, 1, 3)),
                 add(weighted_sum(t, slice_rows(y, 1, 3)), weighted_sum(t, gather_rows(y, rows))));
    });
  }
  SUBCASE("spmm") {
    SparseMatrix s(2, 3);
    std::vector<Eigen::Triplet<double>> e = {{0, 0, 0.5}, {0, 2, -1.0}, {1, 1, 2.0}};
    s.setFromTriplets(e.begin(), e.end());
    expect_gradients(f, [&](Tape& t) { return weighted_sum(t, spmm(s, t.param(f.a))); });
  }
  SUBCASE("segment softmax and row scaling") {
    std::vector<int> seg = {0, 1, 0};
    expect_gradients(f, [&](Tape& t) {
      Var alpha = segment_softmax(t.param(f.col), seg);
      return weighted_sum(t, scale_rows(t.param(f.a), alpha));
    });
  }
  SUBCASE("summed binary cross-entropy") {
    Matrix target(3, 4);
    target << 1, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0, 1;
    expect_gradients(f, [&](Tape& t) { return bce_sum(sigmoid(t.param(f.a)), target, 1e-12); });
  }
}

TEST_CASE("segment softmax normalises within each segment") {
  Tape t(false);
  Matrix s(5, 1);
  s << 3.0, -1.0, 0.5, 700.0, 702.0;
  std::vector<int> seg = {4, 4, 9, 1, 1};
  const Matrix a = segment_softmax(t.constant(s), seg).value();
  CHECK(a(0, 0) + a(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(a(2, 0) == 1.0);
  CHECK(a(3, 0) + a(4, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::isfinite(a(4, 0)));
}

TEST_CASE("bce_sum matches the closed form and clamps") {
  Tape t(false);
  Matrix p(1, 2);
  p << 0.8, 0.0;
  Matrix y(1, 2);
  y << 1.0, 1.0;
  const double v = bce_sum(t.constant(p), y, 1e-12).scalar();
  CHECK(v == doctest::Approx(-std::log(0.8) - std::log(1e-12)));
}

TEST_CASE("dropout scales kept entries and respects rate bounds") {
  Tape t(false);
  Matrix x = Matrix::Ones(4, 4);
  double u = 0.0;
  std::function<double()> uniform = [&]() {
    u += 0.1;
    if (u >= 1.0) u -= 1.0;
    return u;
  };
  const Matrix half = dropout(t.constant(x), 0.5, uniform).value();
  for (Eigen::Index i = 0; i < half.size(); ++i) CHECK((half.data()[i] == 0.0 || half.data()[i] == 2.0));
  CHECK(dropout(t.constant(x), 0.0, uniform).value() == x);
  CHECK(dropout(t.constant(x), 1.0, uniform).value().isZero());
}

TEST_CASE("non-recording tape computes values without gradients") {
  Rng rng(1);
  ParameterStore store;
  Parameter& p = store.add("p", random_matrix(rng, 2, 2));
  Tape t(false);
  Var y = sum(matmul(t.param(p), t.param(p)));
  CHECK(std::isfinite(y.scalar()));
  CHECK_THROWS_AS(t.backward(y), std::logic_error);
}

TEST_CASE("parameter gradients accumulate across uses and tapes") {
  ParameterStore store;
  Parameter& p = store.add("p", Matrix::Constant(1, 1, 2.0));
  for (int k = 0; k < 2; ++k) {
    Tape t;
    Var x = t.param(p);
    t.backward(mul(x, x));
  }
  CHECK(p.grad()(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("shape errors are reported") {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 3));
  Var b = t.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(slice_rows(a, 1, 2), std::out_of_range);
  CHECK_THROWS_AS(t.backward(a), std::invalid_argument);
}
