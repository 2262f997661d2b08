#include <cstdio>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "gradcheck.hpp"
#include "platoon/nn/layers.hpp"

using namespace platoon;
using namespace platoon::nn;

namespace {

Mat rand_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * (2 * uniform01(rng) - 1);
  return m;
}

// Contract an output with a fixed random weighting so every entry matters.
Var probe(Tape& t, Var y, const Mat& w) { return sum(mul(y, t.constant(w))); }

}  // namespace

TEST_CASE("dense layer values") {
  Tape t(false);
  Mat x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Mat I = Mat::Identity(3, 3);
  const Mat y = dense_forward<double>(x, I, Mat::Zero(1, 3));
  CHECK(y == x);
  Mat a(1, 1), W(1, 1), b(1, 1);
  a << 2;
  W << 3;
  b << 1;
  CHECK(dense_forward<double>(a, W, b)(0, 0) == 7.0);
  CHECK_THROWS_AS(dense_forward<double>(x, Mat::Zero(2, 2), Mat::Zero(1, 2)), std::invalid_argument);
  CHECK_THROWS_AS(matmul(t.constant(x), t.constant(Mat::Zero(2, 2))), std::invalid_argument);
}

TEST_CASE("finite differences for every op") {
  Rng rng(11);
  ParameterStore st;
  const int A = st.add("A", rand_mat(4, 3, rng));
  const int B = st.add("B", rand_mat(3, 5, rng));
  const int C = st.add("C", rand_mat(4, 3, rng));
  const int r = st.add("r", rand_mat(1, 3, rng));
  const int c = st.add("c", rand_mat(4, 1, rng));
  const int Q = st.add("Q", rand_mat(6, 4, rng));
  const int K = st.add("K", rand_mat(4, 4, rng));
  const int V = st.add("V", rand_mat(4, 2, rng));
  const int q2 = st.add("q2", rand_mat(3, 2, rng));
  const int w2 = st.add("w2", rand_mat(3, 6, rng));
  Mat mask = Mat::Zero(6, 2);
  mask(1, 0) = -1e9;
  std::map<std::string, std::function<Var(Tape&)>> cases;
  auto P = [&](Tape& t, int i) { return t.param(st, i); };
  const Mat w43 = rand_mat(4, 3, rng), w45 = rand_mat(4, 5, rng);
  cases["matmul"] = [&](Tape& t) { return probe(t, matmul(P(t, A), P(t, B)), w45); };
  cases["add_sub_mul"] = [&](Tape& t) {
    return probe(t, mul(add(P(t, A), P(t, C)), sub(P(t, A), scale(P(t, C), 0.7))), w43);
  };
  cases["add_row_mul_col"] = [&](Tape& t) { return probe(t, mul_col(add_row(P(t, A), P(t, r)), P(t, c)), w43); };
  cases["sigmoid_tanh"] = [&](Tape& t) { return probe(t, mul(sigmoid(P(t, A)), tanh(P(t, C))), w43); };
  cases["relu_elu_abs_square"] = [&](Tape& t) {
    return probe(t, add(add(relu(P(t, A)), elu(P(t, C))), add(abs(P(t, A)), square(P(t, C)))), w43);
  };
  cases["layer_norm"] = [&](Tape& t) { return probe(t, layer_norm(P(t, A), 1e-8), w43); };
  const Mat w62 = rand_mat(6, 2, rng);
  cases["attention"] = [&](Tape& t) {
    return probe(t, attention(P(t, Q), P(t, K), P(t, V), 2, 0.5, mask), w62);
  };
  const Mat w48 = rand_mat(4, 8, rng);
  cases["concat_cols"] = [&](Tape& t) { return probe(t, concat_cols({P(t, A), P(t, C), col_block(P(t, A), 1, 2)}), w48); };
  const Mat w83 = rand_mat(8, 3, rng);
  cases["concat_rows"] = [&](Tape& t) { return probe(t, concat_rows({P(t, A), P(t, C)}), w83); };
  const Mat w23 = rand_mat(2, 3, rng);
  cases["row_block"] = [&](Tape& t) { return probe(t, row_block(P(t, A), 1, 2), w23); };
  const Mat w53 = rand_mat(5, 3, rng);
  cases["select_rows"] = [&](Tape& t) { return probe(t, select_rows(P(t, A), {3, 0, 0, 2, 1}), w53); };
  const Mat w26 = rand_mat(2, 6, rng);
  cases["reshape"] = [&](Tape& t) { return probe(t, reshape(P(t, A), 2, 6), w26); };
  const Mat w123 = rand_mat(12, 3, rng);
  cases["tile_repeat"] = [&](Tape& t) {
    return add(probe(t, tile_rows(P(t, A), 3), w123), probe(t, repeat_rows(P(t, C), 3), w123));
  };
  const Mat w41 = rand_mat(4, 1, rng);
  cases["row_sum_gather"] = [&](Tape& t) {
    return add(probe(t, row_sum(square(P(t, A))), w41), probe(t, gather_cols(P(t, C), {2, 0, 1, 1}), w41));
  };
  const Mat w32 = rand_mat(3, 3, rng);
  cases["batched_vecmat"] = [&](Tape& t) { return probe(t, batched_vecmat(P(t, q2), P(t, w2), 3), w32); };
  for (auto& [name, fn] : cases) {
    CAPTURE(name);
    const auto res = gradcheck::check(st, fn);
    CHECK(res.checked > 0);
    CHECK(res.max_rel < 1e-4);
  }
}

TEST_CASE("attention weights") {
  Rng rng(3);
  Mat w;
  // one key: weight 1 regardless of values
  Mat Q = rand_mat(3, 4, rng), K = rand_mat(1, 4, rng), V = rand_mat(1, 2, rng);
  attention_forward<double>(Q, K, V, 1, 0.5, Mat(), &w);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(w(i, 0) == 1.0);
  Mat K2(2, 4);
  K2.row(0) = K.row(0);
  K2.row(1) = K.row(0);
  attention_forward<double>(Q, K2, rand_mat(2, 2, rng), 1, 0.5, Mat(), &w);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(w(i, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w(i, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  for (int trial = 0; trial < 20; ++trial) {
    attention_forward<double>(rand_mat(10, 5, rng, 3), rand_mat(15, 5, rng, 3), rand_mat(15, 3, rng), 5,
                              1.0 / std::sqrt(5.0), Mat(), &w);
    for (Eigen::Index i = 0; i < w.rows(); ++i) CHECK(std::abs(w.row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("layer norm standardizes rows") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat x = rand_mat(6, 32, rng, 5.0);
    const Mat y = layer_norm_forward<double>(x, 1e-8, nullptr);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double mean = y.row(i).mean();
      const double var = (y.row(i).array() - mean).square().mean();
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("gru cell closed forms and BPTT") {
  ParameterStore st;
  Rng rng(8);
  GruCell cell = GruCell::create(st, "g", 3, 4, rng);
  for (int i = 0; i < st.size(); ++i) st.value(i).setZero();
  {
    Tape t(false);
    Mat h(2, 4);
    h << 1, -2, 0.5, 3, 0, 0, 0, 0;
    // r = z = 1/2, n = tanh(0) = 0, so h' = h / 2
    const Mat out = cell(t, st, t.constant(rand_mat(2, 3, rng)), t.constant(h)).value();
    CHECK((out - 0.5 * h).norm() == 0.0);
    const Mat zero = cell(t, st, t.constant(Mat::Zero(2, 3)), t.constant(Mat::Zero(2, 4))).value();
    CHECK(zero.norm() == 0.0);
  }
  ParameterStore st2;
  cell = GruCell::create(st2, "g", 3, 4, rng);
  {
    Tape t(false);
    const Mat x = rand_mat(5, 3, rng), h = rand_mat(5, 4, rng);
    const Mat a = cell(t, st2, t.constant(x), t.constant(h)).value();
    const Mat b = gru_forward<double>(x, h, st2.value(cell.Wx), st2.value(cell.bx), st2.value(cell.Wh),
                                      st2.value(cell.bh));
    CHECK((a - b).norm() < 1e-14);
  }
  std::vector<Mat> xs;
  for (int s = 0; s < 5; ++s) xs.push_back(rand_mat(2, 3, rng));
  const Mat w = rand_mat(2, 4, rng);
  const int h0 = st2.add("h0", rand_mat(2, 4, rng));
  auto loss = [&](Tape& t) {
    Var h = t.param(st2, h0);
    Var acc = t.constant(Mat::Zero(1, 1));
    for (const auto& x : xs) {
      h = cell(t, st2, t.constant(x), h);
      acc = add(acc, probe(t, h, w));
    }
    return acc;
  };
  const auto res = gradcheck::check(st2, loss);
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("layers under finite differences") {
  ParameterStore st;
  Rng rng(21);
  Linear lin = Linear::create(st, "fc", 5, 3, rng);
  LayerNorm ln = LayerNorm::create(st, "ln", 3);
  st.value(ln.gamma) = rand_mat(1, 3, rng);
  st.value(ln.beta) = rand_mat(1, 3, rng);
  const int x = st.add("x", rand_mat(4, 5, rng));
  const Mat w = rand_mat(4, 3, rng);
  const auto res = gradcheck::check(st, [&](Tape& t) { return probe(t, ln(t, st, lin(t, st, t.param(st, x))), w); });
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("rmsprop behaviour") {
  ParameterStore st;
  st.add("x", Mat::Constant(1, 1, 3.0));
  RmsProp opt(st, {});
  auto zero = st.zeros_like();
  opt.step(st, zero);
  CHECK(st.value(0)(0, 0) == 3.0);

  // f(x) = (x - 1)^2, descending monotonically toward 1
  RmsPropConfig cfg;
  cfg.lr = 0.01;
  RmsProp opt2(st, cfg);
  double last = std::abs(st.value(0)(0, 0) - 1.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<Mat> g{Mat::Constant(1, 1, 2.0 * (st.value(0)(0, 0) - 1.0))};
    opt2.step(st, g);
    const double d = std::abs(st.value(0)(0, 0) - 1.0);
    CHECK(d < last);
    last = d;
  }

  ParameterStore big;
  big.add("a", Mat::Zero(1, 2));
  RmsProp opt3(big, {});
  std::vector<Mat> g{Mat(1, 2)};
  g[0] << 60.0, 80.0;
  const double pre = opt3.step(big, g);
  CHECK(pre == doctest::Approx(100.0));
  CHECK(global_norm(g) == doctest::Approx(10.0).epsilon(1e-6));

  std::vector<Mat> bad{Mat::Constant(1, 2, std::nan(""))};
  CHECK_THROWS_AS(opt3.step(big, bad), std::runtime_error);
}

TEST_CASE("non-finite values are rejected on the tape") {
  Tape t;
  Var a = t.constant(Mat::Constant(1, 1, 1e308));
  CHECK_THROWS_AS(scale(a, 10.0), std::runtime_error);
}

TEST_CASE("checkpoint round-trip is bit exact") {
  Rng rng(99);
  Checkpoint ck;
  ck.header_json = R"({"q":5})";
  ck.params.add("w", rand_mat(3, 7, rng));
  ck.params.add("empty", Mat(0, 4));
  ParameterStore extra;
  extra.add("m", Mat::Constant(2, 2, 0.1 + 0.2));
  ck.extra.push_back(extra);
  const auto path = (std::filesystem::temp_directory_path() / "platoon_ck_test.bin").string();
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(back.header_json == ck.header_json);
  CHECK(back.params == ck.params);
  REQUIRE(back.extra.size() == 1);
  CHECK(back.extra[0] == extra);
  {
    std::FILE* f = std::fopen(path.c_str(), "r+b");
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("uniform init bounds and determinism") {
  Rng a(5), b(5);
  const Mat m1 = uniform_init(64, 16, 16, a);
  const Mat m2 = uniform_init(64, 16, 16, b);
  CHECK(m1 == m2);
  CHECK(m1.cwiseAbs().maxCoeff() <= 0.25);
  CHECK(m1.cwiseAbs().maxCoeff() > 0.2);
}
