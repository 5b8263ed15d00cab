#include <gtest/gtest.h>

#include "mmbeam/core/graph_ops.hpp"
#include "mmbeam/core/tape.hpp"
#include "support/gradcheck.hpp"

using namespace mmbeam;
using testsupport::gradcheck_params;

namespace {

Mat<double> randn(int r, int c, Rng& rng, double scale = 1.0) {
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.normal(0.0, scale);
  return m;
}

class TapeGrad : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(7);
    ps.add("a", randn(4, 5, rng));
    ps.add("b", randn(5, 3, rng));
    ps.add("c", randn(4, 3, rng));
    ps.add("row", randn(1, 3, rng));
    ps.add("sq", randn(4, 4, rng));
    // keep relu inputs away from the kink
    Mat<double>& a = ps.value("a");
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (std::abs(a.data()[i]) < 0.2) a.data()[i] += 0.5;
  }
  ParamStore<double> ps;
};

}  // namespace

TEST_F(TapeGrad, MatmulAddScale) {
  auto fwd = [&](Tape<double>& t) {
    int y = t.matmul(t.param("a"), t.param("b"));
    y = t.add(y, t.param("c"));
    y = t.scale(y, 1.7);
    return t.sum_all(t.relu(y));
  };
  auto res = gradcheck_params(ps, fwd, {"a", "b", "c"});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST_F(TapeGrad, AddRowVecSoftmax) {
  Rng rng(9);
  ps.add("b0", randn(3, 2, rng));
  auto fwd = [&](Tape<double>& t) {
    int y = t.add_rowvec(t.matmul(t.param("a"), t.param("b")), t.param("row"));
    int s = t.softmax_rows(y);
    // weight the entries so the probe is not constant under softmax shifts
    int w = t.matmul(s, t.param("b0"));
    return t.sum_all(w);
  };
  auto res = gradcheck_params(ps, fwd, {"a", "b", "row", "b0"});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST_F(TapeGrad, LogSoftmaxDiagSelect) {
  auto fwd = [&](Tape<double>& t) {
    int y = t.log_softmax_rows(t.param("sq"));
    int d = t.diag(y);
    int sel = t.row_select(t.param("c"), {2, 0, 1, 2});
    return t.sum_all(t.concat_rows({d, sel}));
  };
  auto res = gradcheck_params(ps, fwd, {"sq", "c"});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST_F(TapeGrad, LayerNorm) {
  Rng rng(11);
  ps.add("gamma", randn(1, 5, rng));
  ps.add("beta", randn(1, 5, rng));
  auto fwd = [&](Tape<double>& t) {
    int y = t.layer_norm_rows(t.param("a"), t.param("gamma"), t.param("beta"));
    int z = t.matmul(y, t.param("b"));
    return t.sum_all(t.relu(z));
  };
  auto res = gradcheck_params(ps, fwd, {"a", "gamma", "beta", "b"}, 10);
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST_F(TapeGrad, GatherSliceReshapeConcat) {
  auto fwd = [&](Tape<double>& t) {
    int g = t.row_gather(t.param("a"), {3, 0, 0, -1, 2, 1});  // dup + pad
    int s1 = t.slice_rows(g, 1, 4);
    int s2 = t.slice_cols(s1, 1, 4);
    int r = t.reshape(s2, 2, 8);
    int cc = t.concat_cols({r, t.slice_cols(t.slice_rows(t.param("sq"), 0, 2), 0, 4)});
    int cr = t.concat_rows({cc, cc});
    return t.sum_all(t.relu(cr));
  };
  auto res = gradcheck_params(ps, fwd, {"a", "sq"}, 12);
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST_F(TapeGrad, TransposeMeanRows) {
  auto fwd = [&](Tape<double>& t) {
    int y = t.matmul(t.transpose(t.param("a")), t.param("c"));
    return t.sum_all(t.mean_rows(t.relu(y)));
  };
  auto res = gradcheck_params(ps, fwd, {"a", "c"});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST_F(TapeGrad, SegmentMeanMax) {
  std::vector<int> seg = {0, 2, 2, 0};
  auto fwd = [&](Tape<double>& t) {
    int mean = t.segment_mean(t.param("a"), seg, 4);
    int mx = t.segment_max(t.param("a"), seg, 4);
    int y = t.concat_cols({mean, mx});
    return t.sum_all(t.relu(y));
  };
  auto res = gradcheck_params(ps, fwd, {"a"}, 20);
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST(TapeSegment, EmptySegmentsAreExactlyZero) {
  Rng rng(3);
  Mat<double> x = randn(3, 4, rng);
  Tape<double> t;
  int xi = t.input(x);
  int mean = t.segment_mean(xi, {1, 1, 3}, 5);
  int mx = t.segment_max(xi, {1, 1, 3}, 5);
  for (int s : {0, 2, 4}) {
    EXPECT_TRUE((t.value(mean).row(s).array() == 0.0).all());
    EXPECT_TRUE((t.value(mx).row(s).array() == 0.0).all());
  }
  EXPECT_DOUBLE_EQ(t.value(mean)(1, 0), (x(0, 0) + x(1, 0)) / 2.0);
  EXPECT_DOUBLE_EQ(t.value(mx)(1, 0), std::max(x(0, 0), x(1, 0)));
}

TEST_F(TapeGrad, L2NormalizeAndScalarNode) {
  auto fwd = [&](Tape<double>& t) {
    int y = t.l2_normalize_rows(t.param("a"));
    int s = t.sum_all(t.param("row"));
    int z = t.mul_by_scalar_node(y, s);
    return t.sum_all(t.matmul(z, t.param("b")));
  };
  auto res = gradcheck_params(ps, fwd, {"a", "row", "b"});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}

TEST(TapeOps, L2NormalizeRejectsZeroRow) {
  Mat<double> x = Mat<double>::Zero(2, 3);
  x(0, 1) = 1.0;
  Tape<double> t;
  EXPECT_THROW(t.l2_normalize_rows(t.input(x)), std::invalid_argument);
}

TEST(TapeOps, MatmulShapeMismatchThrows) {
  Tape<double> t;
  Mat<double> a = Mat<double>::Zero(2, 3), b = Mat<double>::Zero(2, 3);
  int ai = t.input(a), bi = t.input(b);
  EXPECT_THROW(t.matmul(ai, bi), std::invalid_argument);
}

TEST(TapeOps, AttentionBlockComposite) {
  Rng rng(21);
  const int d = 8, tks = 6;
  ParamStore<double> ps2;
  ps2.add("x", randn(tks, d, rng, 0.5));
  for (const char* nm : {"wq", "wk", "wv", "wo"})
    ps2.add(nm, randn(d, d, rng, 0.4));
  for (const char* nm : {"bq", "bk", "bv", "bo"})
    ps2.add(nm, randn(1, d, rng, 0.1));
  ps2.add("probe", randn(d, 1, rng));
  auto fwd = [&](Tape<double>& t) {
    AttnWeights w{t.param("wq"), t.param("bq"), t.param("wk"), t.param("bk"),
                  t.param("wv"), t.param("bv"), t.param("wo"), t.param("bo")};
    int y = mhsa_n(t, t.param("x"), w, 2);
    return t.sum_all(t.matmul(y, t.param("probe")));
  };
  auto res = gradcheck_params(
      ps2, fwd, {"x", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "probe"});
  EXPECT_LT(res.max_rel_err, 1e-4) << res.worst;
}
