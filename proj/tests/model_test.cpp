#include "doctest.h"

#include "imt/math/grad_check.hpp"
#include "imt/math/ops.hpp"
#include "imt/model/seq2seq.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace imt;

namespace {

ModelConfig tiny_config(std::uint64_t seed, std::size_t vocab = 9) {
  ModelConfig c;
  c.src_vocab = vocab;
  c.tgt_vocab = vocab;
  c.embed = 4;
  c.enc_hidden = 3;
  c.dec_hidden = 5;
  c.readout = 4;
  c.init_range = 0.5;
  c.seed = seed;
  return c;
}

std::vector<TokenId> random_sentence(std::mt19937_64& rng, std::size_t vocab, std::size_t len) {
  std::vector<TokenId> s(len);
  for (auto& t : s) t = kReservedCount + static_cast<TokenId>(rng() % (vocab - kReservedCount));
  return s;
}

}  // namespace

TEST_CASE("vocab reserves ids and maps unknown words to UNK") {
  const std::vector<std::string> words = {"alpha", "beta"};
  const Vocab v(words);
  CHECK(v.size() == kReservedCount + 2);
  CHECK(v.id("alpha") == kReservedCount);
  CHECK(v.id("gamma") == kUnk);
  CHECK(v.surface(kEos) == "</s>");
  CHECK_THROWS(Vocab(std::vector<std::string>{"a", "a"}));
  const auto path = std::filesystem::temp_directory_path() / "imt_vocab_test.txt";
  v.save(path);
  CHECK(Vocab::load(path) == v);
  std::filesystem::remove(path);
}

TEST_CASE("encode preserves length and is deterministic") {
  const Seq2Seq model(tiny_config(1));
  const std::vector<TokenId> src = {5, 6, 7, 8, 5};
  const Annotations a = model.encode(src);
  CHECK(a.size() == 5);
  CHECK(a.states.cols() == 6);
  CHECK(a.states == model.encode(src).states);
  const std::vector<TokenId> one = {6};
  const Annotations b = model.encode(one);
  CHECK(b.size() == 1);
  CHECK(b.states.allFinite());
  CHECK_THROWS(model.encode(std::vector<TokenId>{}));
  CHECK_THROWS(model.encode(std::vector<TokenId>{99}));
}

TEST_CASE("attend") {
  Seq2Seq model(tiny_config(2));
  const std::vector<TokenId> src = {5, 6, 7};
  SUBCASE("zero scoring weights give the mean annotation") {
    model.params().get("dec.fwd.att.A").value.fill(0.0);
    const Annotations a = model.encode(src);
    const auto att = model.attend(Direction::kForward, Vec::Ones(5), a);
    for (int i = 0; i < 3; ++i) CHECK(att.weights[i] == doctest::Approx(1.0 / 3.0));
    CHECK((att.context - a.mean).norm() < 1e-12);
  }
  SUBCASE("single annotation gets all the weight") {
    const Annotations a = model.encode(std::vector<TokenId>{5});
    const auto att = model.attend(Direction::kBackward, Vec::Ones(5), a);
    CHECK(att.weights[0] == doctest::Approx(1.0));
    CHECK((att.context - a.states.row(0).transpose()).norm() < 1e-12);
  }
  SUBCASE("hand-built scores [1,2]") {
    ModelConfig c = tiny_config(3);
    c.enc_hidden = 1;
    c.dec_hidden = 1;
    Seq2Seq m(c);
    // A = [1 0], so score_i = s * h_i[0]; with s = 1 the scores are the first column.
    auto& A = m.params().get("dec.fwd.att.A").value;
    A[0] = 1.0;
    A[1] = 0.0;
    Mat states(2, 2);
    states << 1.0, 0.3, 2.0, -0.4;
    const Annotations a = m.annotations_from(states);
    Vec q(1);
    q << 1.0;
    const auto att = m.attend(Direction::kForward, q, a);
    CHECK(att.weights[0] == doctest::Approx(0.26894).epsilon(1e-5));
    CHECK(att.weights[1] == doctest::Approx(0.73106).epsilon(1e-5));
  }
}

TEST_CASE("decoder_step distribution, determinism and token validation") {
  const Seq2Seq model(tiny_config(4));
  const Annotations a = model.encode(std::vector<TokenId>{5, 7, 6});
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    const DecoderState s0 = model.initial_state(d, a);
    const StepOutput o1 = model.decoder_step(d, start_token(d), s0, a);
    const StepOutput o2 = model.decoder_step(d, start_token(d), s0, a);
    CHECK(std::abs(softmax(o1.logits).sum() - 1.0) < 1e-9);
    CHECK(o1.logits == o2.logits);
    CHECK(o1.state.s == o2.state.s);
    CHECK_THROWS(model.decoder_step(d, 100, s0, a));
    CHECK_THROWS(model.decoder_step(d, -1, s0, a));
  }
}

TEST_CASE("attention weights sum to one at every teacher-forced step") {
  const Seq2Seq model(tiny_config(5));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto src = random_sentence(rng, 9, 1 + rng() % 6);
    const auto tgt = random_sentence(rng, 9, 1 + rng() % 6);
    const Annotations a = model.encode(src);
    DecoderState st = model.initial_state(Direction::kForward, a);
    for (TokenId t : tgt) {
      const auto att = model.attend(Direction::kForward, st.s, a);
      CHECK(std::abs(att.weights.sum() - 1.0) < 1e-9);
      CHECK((att.weights.array() >= 0.0).all());
      st = model.decoder_step(Direction::kForward, t, st, a).state;
    }
  }
}

TEST_CASE("joint loss decomposes into forward and backward terms exactly") {
  Seq2Seq model(tiny_config(6));
  const std::vector<TokenId> src = {5, 6, 7, 8};
  const std::vector<TokenId> tgt = {8, 7, 6};
  const double fwd = model.direction_loss(Direction::kForward, src, tgt);
  const double bwd = model.direction_loss(Direction::kBackward, src, tgt);
  CHECK(model.joint_loss(src, tgt) == fwd + bwd);
  CHECK(model.joint_loss_and_grad(src, tgt) == fwd + bwd);
  CHECK_THROWS(model.joint_loss(src, std::vector<TokenId>{}));
}

TEST_CASE("uniform output distribution gives loss 2 ln V") {
  Seq2Seq model(tiny_config(7, 11));
  model.params().get("dec.fwd.out.W").value.fill(0.0);
  model.params().get("dec.fwd.out.b").value.fill(0.0);
  model.params().get("dec.bwd.out.W").value.fill(0.0);
  model.params().get("dec.bwd.out.b").value.fill(0.0);
  const std::vector<TokenId> src = {5, 6};
  const std::vector<TokenId> tgt = {7, 8, 9};
  CHECK(model.joint_loss(src, tgt) == doctest::Approx(2.0 * std::log(11.0)).epsilon(1e-12));
}

TEST_CASE("sequence_nll reaches zero for a perfect fit") {
  Vec certain = Vec::Constant(4, -1e300);
  certain[2] = 0.0;
  const std::vector<Vec> rows = {certain, certain};
  const std::vector<TokenId> gold = {2, 2};
  CHECK(sequence_nll(rows, gold) == 0.0);
}

TEST_CASE("backward decoder on reversed targets matches a forward decoder on a reversed corpus") {
  // Copy the backward decoder's weights into the forward slots of a twin
  // model; scoring the reversed target with the twin's forward decoder must
  // then equal scoring the original target with the backward decoder, up to
  // the swapped terminal tokens, which we align by swapping their rows too.
  Seq2Seq model(tiny_config(8));
  Seq2Seq twin = model;
  for (const char* part : {"init.W", "init.b", "att.A", "gru.W", "gru.U", "gru.b", "read.W",
                           "read.b", "out.W", "out.b"}) {
    twin.params().get(std::string("dec.fwd.") + part).value =
        model.params().get(std::string("dec.bwd.") + part).value;
  }
  auto swap_rows = [](Tensor& t) {
    auto m = t.mat();
    m.row(kBos).swap(m.row(kEos));
  };
  swap_rows(twin.params().get("tgt_emb").value);
  swap_rows(twin.params().get("dec.fwd.out.W").value);
  swap_rows(twin.params().get("dec.fwd.out.b").value);

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto src = random_sentence(rng, 9, 2 + rng() % 4);
    const auto tgt = random_sentence(rng, 9, 1 + rng() % 5);
    const std::vector<TokenId> rev(tgt.rbegin(), tgt.rend());
    const double bwd = model.direction_loss(Direction::kBackward, src, tgt);
    const double fwd_twin = twin.direction_loss(Direction::kForward, src, rev);
    CHECK(bwd == doctest::Approx(fwd_twin).epsilon(1e-12));
  }
}

TEST_CASE("joint loss gradient matches finite differences") {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Seq2Seq model(tiny_config(100 + static_cast<std::uint64_t>(trial)));
    const auto src = random_sentence(rng, 9, 2 + rng() % 4);
    const auto tgt = random_sentence(rng, 9, 1 + rng() % 4);
    GradCheckOptions opts;
    opts.max_coords_per_param = 40;
    const auto report = grad_check(
        model.params(), [&] { return model.joint_loss_and_grad(src, tgt); },
        [&] { return model.joint_loss(src, tgt); }, opts);
    for (const auto& e : report.per_parameter) {
      INFO(e.name << " rel=" << e.max_relative_error << " a=" << e.analytic_at_worst
                  << " n=" << e.numeric_at_worst);
      CHECK(e.max_relative_error < 1e-4);
    }
    worst = std::max(worst, report.max_relative_error);
  }
  MESSAGE("worst relative error " << worst);
}
