#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <fstream>

#include "fedlion/errors.hpp"
#include "fedlion/models.hpp"
#include "test_util.hpp"

namespace fedlion {
void PrintTo(const ModelArch& a, std::ostream* os) { *os << a.to_json().dump(); }
}  // namespace fedlion

using namespace fedlion;

namespace {

std::vector<Example> random_examples(CounterRng& rng, std::size_t n, std::size_t k, int classes) {
  std::vector<Example> out(n);
  for (auto& e : out) {
    e.features.resize(k);
    for (auto& f : e.features) f = rng.normal();
    e.label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(classes)));
    e.target = rng.normal();
  }
  return out;
}

Batch batch_of(const std::vector<Example>& ex) {
  Batch b;
  for (const auto& e : ex) b.push_back(&e);
  return b;
}

// Central differences with step h.
double max_fd_error(const ModelArch& arch, const ParamVector& x, const Batch& b) {
  const auto g = grad(arch, x, b);
  const double h = 1e-5;
  double worst = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double fd = (loss(arch, xp, b) - loss(arch, xm, b)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[j]) / (1 + linf_norm(g)));
  }
  return worst;
}

}  // namespace

TEST(Arch, ParameterCounts) {
  EXPECT_EQ(ModelArch::linear(7).d(), 8u);
  EXPECT_EQ(ModelArch::logistic(7, 3).d(), 24u);
  EXPECT_EQ(ModelArch::mlp(7, 5, 3).d(), 7u * 5 + 5 + 5 * 3 + 3);
}

TEST(Arch, JsonRoundTrip) {
  for (const auto& a : {ModelArch::linear(4), ModelArch::logistic(4, 6), ModelArch::mlp(4, 9, 6)}) {
    const auto b = ModelArch::from_json(a.to_json());
    EXPECT_EQ(b.kind, a.kind);
    EXPECT_EQ(b.d(), a.d());
  }
  EXPECT_THROW(model_kind_from_string("cnn"), UsageError);
}

TEST(Loss, LinearHandComputed) {
  // w = [2, -1], b = 0.5: predictions 2*1 - 1*3 + .5 = -0.5 and 0.5.
  std::vector<Example> ex(2);
  ex[0].features = {1, 3};
  ex[0].target = 0.5;
  ex[1].features = {0, 0};
  ex[1].target = 1.5;
  const ParamVector w{2, -1, 0.5};
  EXPECT_DOUBLE_EQ(loss(ModelArch::linear(2), w, batch_of(ex)), (1.0 + 1.0) / 2);
}

TEST(Loss, ZeroLogisticIsLogC) {
  auto rng = CounterRng::keyed(1, StreamTag::data);
  const auto ex = random_examples(rng, 10, 4, 5);
  const auto arch = ModelArch::logistic(4, 5);
  EXPECT_NEAR(loss(arch, ParamVector(arch.d()), batch_of(ex)), std::log(5.0), 1e-14);
}

TEST(Loss, LogSumExpIsStable) {
  std::vector<Example> ex(1);
  ex[0].features = {1.0};
  ex[0].label = 0;
  const auto arch = ModelArch::logistic(1, 2);
  // logits = [1000, -1000]: loss ~ 0, no overflow.
  const ParamVector w{1000, -1000, 0, 0};
  EXPECT_NEAR(loss(arch, w, batch_of(ex)), 0.0, 1e-12);
  const ParamVector w2{-1000, 1000, 0, 0};
  EXPECT_NEAR(loss(arch, w2, batch_of(ex)), 2000.0, 1e-9);
}

TEST(Loss, InputValidation) {
  auto rng = CounterRng::keyed(1, StreamTag::data);
  auto ex = random_examples(rng, 3, 4, 3);
  ex[0].label = 2;
  const auto arch = ModelArch::logistic(4, 3);
  EXPECT_THROW(loss(arch, ParamVector(arch.d() + 1), batch_of(ex)), ShapeError);
  EXPECT_THROW(loss(arch, ParamVector(arch.d()), Batch{}), UsageError);
  EXPECT_THROW(loss(ModelArch::logistic(5, 3), ParamVector(ModelArch::logistic(5, 3).d()),
                    batch_of(ex)),
               ShapeError);
  EXPECT_THROW(loss(ModelArch::logistic(4, 2), ParamVector(ModelArch::logistic(4, 2).d()),
                    batch_of(ex)),
               UsageError);
}

TEST(Grad, NonFiniteIsNumericError) {
  auto rng = CounterRng::keyed(1, StreamTag::data);
  const auto ex = random_examples(rng, 3, 2, 2);
  const auto arch = ModelArch::linear(2);
  ParamVector w{1e308, 1e308, 0};
  EXPECT_THROW(loss(arch, w, batch_of(ex)), NumericError);
  EXPECT_THROW(grad(arch, w, batch_of(ex)), NumericError);
}

class FiniteDifference : public ::testing::TestWithParam<ModelArch> {};

TEST_P(FiniteDifference, MatchesAnalyticGradient) {
  const ModelArch arch = GetParam();
  auto rng = CounterRng::keyed(77, StreamTag::data);
  const auto ex = random_examples(rng, 16, arch.input_dim, static_cast<int>(arch.num_classes));
  for (int point = 0; point < 10; ++point) {
    ParamVector x(arch.d());
    for (auto& v : x) v = 0.5 * rng.normal();
    EXPECT_LT(max_fd_error(arch, x, batch_of(ex)), 1e-6) << "point " << point;
  }
}

INSTANTIATE_TEST_SUITE_P(Models, FiniteDifference,
                         ::testing::Values(ModelArch::linear(6), ModelArch::logistic(6, 4),
                                           ModelArch::mlp(6, 8, 4)),
                         [](const auto& info) { return to_string(info.param.kind); });

TEST(Glorot, BiasesZeroWeightsBounded) {
  const auto arch = ModelArch::mlp(10, 6, 3);
  auto rng = CounterRng::keyed(4, StreamTag::init);
  const auto x = glorot_init(arch, rng);
  ASSERT_EQ(x.size(), arch.d());
  const double lim1 = std::sqrt(6.0 / (10 + 6)), lim2 = std::sqrt(6.0 / (6 + 3));
  for (std::size_t j = 0; j < 60; ++j) EXPECT_LE(std::abs(x[j]), lim1);
  for (std::size_t j = 60; j < 66; ++j) EXPECT_EQ(x[j], 0.0);
  for (std::size_t j = 66; j < 84; ++j) EXPECT_LE(std::abs(x[j]), lim2);
  for (std::size_t j = 84; j < 87; ++j) EXPECT_EQ(x[j], 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto path = scratch_dir() / "m.ckpt";
  const ParamVector x{1.0 / 3, -0.0, 5e-324, 1e300};
  write_checkpoint(path, {{"arch", ModelArch::linear(3).to_json()}, {"seed", 9}}, x);
  const auto ck = read_checkpoint(path);
  EXPECT_EQ(ck.header["d"], 4);
  EXPECT_EQ(ck.header["seed"], 9);
  ASSERT_EQ(ck.params.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(ck.params[j]), std::bit_cast<std::uint64_t>(x[j]));
  }
}

TEST(Checkpoint, TruncatedFileIsFormatError) {
  const auto path = scratch_dir() / "m.ckpt";
  write_checkpoint(path, {}, ParamVector{1, 2, 3});
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  EXPECT_THROW(read_checkpoint(path), FormatError);
  std::ofstream(path) << "not json\n";
  EXPECT_THROW(read_checkpoint(path), FormatError);
}
