#include "doctest.h"

#include "support/session_fixtures.hpp"

#include "imt/sim/align.hpp"
#include "imt/sim/simulator.hpp"

#include <cmath>
#include <map>

using namespace imt;
using namespace imt::testing;

namespace {

Sentence words(const std::string& text) { return tokenize(text); }

// Straightforward BLEU written independently of the library: n-grams as
// joined strings, clipping by scanning each reference.
double naive_corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  double matches[4] = {0, 0, 0, 0}, totals[4] = {0, 0, 0, 0};
  double c = 0, r = 0;
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    c += static_cast<double>(hyps[k].size());
    r += static_cast<double>(refs[k].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto grams = [n](const Sentence& s) {
        std::map<std::string, int> m;
        for (std::size_t i = 0; i + n <= s.size(); ++i) {
          std::string g;
          for (std::size_t j = i; j < i + n; ++j) g += s[j] + "\x1f";
          ++m[g];
        }
        return m;
      };
      const auto h = grams(hyps[k]);
      const auto rf = grams(refs[k]);
      for (const auto& [g, cnt] : h) {
        totals[n - 1] += cnt;
        const auto it = rf.find(g);
        matches[n - 1] += std::min(cnt, it == rf.end() ? 0 : it->second);
      }
    }
  }
  double log_p = 0;
  for (int n = 0; n < 4; ++n) {
    if (matches[n] == 0) return 0.0;
    log_p += std::log(matches[n] / totals[n]) / 4.0;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_p);
}

Sentence random_sentence(std::mt19937_64& rng, std::size_t alphabet, std::size_t max_len) {
  Sentence s;
  const std::size_t len = 1 + rng() % max_len;
  for (std::size_t i = 0; i < len; ++i) s.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
  return s;
}

std::size_t levenshtein(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Sentence apply_script(const Sentence& hyp, const Sentence& ref, const std::vector<EditOp>& script) {
  Sentence out;
  for (const auto& op : script) {
    switch (op.kind) {
      case EditKind::kMatch: out.push_back(hyp[op.hyp_index]); break;
      case EditKind::kSubstitute:
      case EditKind::kInsert: out.push_back(ref[op.ref_index]); break;
      case EditKind::kDelete: break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("corpus_bleu examples") {
  const std::vector<Sentence> hyp = {words("a b c d")};
  const std::vector<Sentence> ref = {words("a b c d e f")};
  CHECK(corpus_bleu(hyp, ref) == doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(std::abs(corpus_bleu(hyp, ref) - std::exp(-0.5)) < 1e-12);
  CHECK(corpus_bleu(ref, ref) == 1.0);
  CHECK(corpus_bleu(std::vector<Sentence>{words("x y z w")}, ref) == 0.0);
  CHECK_THROWS(corpus_bleu(std::vector<Sentence>{}, std::vector<Sentence>{}));
  CHECK_THROWS(corpus_bleu(hyp, std::vector<Sentence>{}));
  CHECK(corpus_bleu(std::vector<Sentence>{{}}, ref) == 0.0);
}

TEST_CASE("corpus_bleu agrees with an independent implementation") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Sentence> hyps, refs;
    const std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      refs.push_back(random_sentence(rng, 4, 9));
      hyps.push_back(random_sentence(rng, 4, 9));
    }
    const double got = corpus_bleu(hyps, refs);
    CHECK(got == doctest::Approx(naive_corpus_bleu(hyps, refs)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("BLEU statistics are additive and order-free") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Sentence> hyps, refs;
    const std::size_t n = 2 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      refs.push_back(random_sentence(rng, 3, 8));
      hyps.push_back(random_sentence(rng, 3, 8));
    }
    BleuStats all, left, right;
    const std::size_t cut = rng() % n;
    for (std::size_t i = 0; i < n; ++i) {
      const BleuStats s = bleu_stats(hyps[i], std::span<const Sentence>(&refs[i], 1));
      all += s;
      (i < cut ? left : right) += s;
    }
    left += right;
    CHECK(left == all);
    CHECK(bleu_from_stats(all) == corpus_bleu(hyps, refs));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Sentence> h2, r2;
    for (auto i : order) {
      h2.push_back(hyps[i]);
      r2.push_back(refs[i]);
    }
    CHECK(corpus_bleu(h2, r2) == corpus_bleu(hyps, refs));
  }
}

TEST_CASE("closest reference length with multiple references") {
  const Sentence hyp = words("a b c d e");
  const std::vector<Sentence> refs = {words("a b c d e f g h"), words("a b c d"), words("a b c d e f")};
  const BleuStats s = bleu_stats(hyp, refs);
  CHECK(s.ref_len == 4);  // 4 and 6 are equally close; the shorter wins
  CHECK(s.matches[0] == 5);
  const std::vector<std::vector<Sentence>> multi = {refs};
  CHECK(corpus_bleu(std::vector<Sentence>{hyp}, multi) == 1.0);
}

TEST_CASE("smoothed sentence BLEU") {
  const Sentence ref = words("a b c d e f");
  CHECK(sentence_bleu_smoothed(ref, ref) == doctest::Approx(1.0));
  CHECK(sentence_bleu_smoothed(words("x y"), ref) == 0.0);
  CHECK(sentence_bleu_smoothed(words("a c"), ref) > 0.0);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const Sentence r = random_sentence(rng, 5, 12);
    // Growing a prefix of the reference adds only matching n-grams.
    for (std::size_t len = 1; len < r.size(); ++len) {
      const Sentence shorter(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(len));
      const Sentence longer(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(len + 1));
      CHECK(sentence_bleu_smoothed(longer, r) >= sentence_bleu_smoothed(shorter, r));
    }
  }
}

TEST_CASE("align examples") {
  const auto a = words("a x c"), b = words("a b c");
  const auto sub = align<std::string>(a, b);
  REQUIRE(sub.size() == 3);
  CHECK(sub[1] == EditOp{EditKind::kSubstitute, 1, 1});
  CHECK(edit_distance(sub) == 1);

  const auto ins = align<std::string>(words("a c"), b);
  REQUIRE(ins.size() == 3);
  CHECK(ins[1] == EditOp{EditKind::kInsert, 1, 1});

  for (const auto& op : align<std::string>(b, b)) CHECK(op.kind == EditKind::kMatch);
  const auto del = align<std::string>(words("a b c"), words("b c"));
  CHECK(del.front() == EditOp{EditKind::kDelete, 0, 0});
  // Substitutions win ties against delete + insert.
  const auto swap = align<std::string>(words("a b"), words("b c"));
  CHECK(swap[0].kind == EditKind::kSubstitute);
  CHECK(swap[1].kind == EditKind::kSubstitute);
  CHECK(align<std::string>(Sentence{}, Sentence{}).empty());
  CHECK(std::string(edit_kind_name(EditKind::kInsert)) == "insert");
}

TEST_CASE("alignment is a minimal script that rewrites the hypothesis into the reference") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 500; ++trial) {
    const Sentence h = random_sentence(rng, 3, 8), r = random_sentence(rng, 3, 8);
    const auto script = align<std::string>(h, r);
    CHECK(apply_script(h, r, script) == r);
    CHECK(edit_distance(script) == levenshtein(h, r));
  }
}

TEST_CASE("candidate revisions come from the alignment") {
  const auto hyp = words("a x c d");
  const auto ref = words("a b c e d");
  const std::vector<std::size_t> none;
  const auto c = candidate_revisions(hyp, none, ref);
  REQUIRE(c.size() == 2);
  CHECK(c[0].position == 1);
  CHECK(c[0].new_surface == "b");
  CHECK_FALSE(c[0].insert);
  CHECK(c[1].position == 3);
  CHECK(c[1].new_surface == "e");
  CHECK(c[1].insert);
  const std::vector<std::size_t> pinned = {1};
  CHECK(candidate_revisions(hyp, pinned, ref).size() == 1);
  CHECK(candidate_revisions(ref, none, ref).empty());

  const std::vector<double> scores = {0.2, 0.5, 0.5, 0.1};
  CHECK(pick_critical(scores, 0.3) == 1u);
  CHECK_FALSE(pick_critical(scores, 0.5));
  CHECK_FALSE(pick_critical(std::vector<double>{}, 0.0));
}

TEST_CASE("a mid-sentence fix that repairs its left is critical for bidir only") {
  // a=5 b=6 x=7 y=8; the reference is "b y". The forward model writes "a x"
  // and keeps "x" after either first word; the backward model puts "b" before "y".
  static constexpr TokenId a = 5, b = 6, x = 7, y = 8;
  const std::map<TokenId, std::string> names = {{a, "a"}, {b, "b"}, {x, "x"}, {y, "y"}};
  const HistoryScorer fwd(Direction::kForward, 9, [](std::span<const TokenId> h) {
    if (h.empty()) return logits_with(9, {{a, 2.0}, {b, 1.0}});
    if (h.size() == 1) return logits_with(9, {{x, 3.0}, {y, 1.0}});
    return logits_with(9, {{kEos, 3.0}});
  });
  const HistoryScorer bwd(Direction::kBackward, 9, [](std::span<const TokenId> h) {
    if (h.empty()) return logits_with(9, {{x, 2.0}, {y, 1.0}});
    if (h.back() == y) return logits_with(9, {{b, 3.0}, {a, 0.5}});
    if (h.back() == x) return logits_with(9, {{a, 3.0}, {b, 0.5}});
    return logits_with(9, {{kBos, 3.0}});
  });
  const std::map<std::string, TokenId> ids = {{"a", a}, {"b", b}, {"x", x}, {"y", y}};
  const auto surfaces = [&](const std::vector<TokenId>& t) {
    Sentence s;
    for (auto id : t) s.push_back(names.at(id));
    return s;
  };
  const Sentence ref = words("b y");
  const std::vector<TokenId> initial = beam_search(fwd, {4, 6}).tokens;
  REQUIRE(surfaces(initial) == words("a x"));

  std::map<Strategy, RevisionRequest> picked;
  for (const Strategy strategy : {Strategy::kBiDir, Strategy::kUniDirGrid, Strategy::kUniDir}) {
    const auto candidates = candidate_revisions(surfaces(initial), std::vector<std::size_t>{}, ref);
    REQUIRE(candidates.size() == 2);
    std::vector<double> scores;
    for (const auto& c : candidates) {
      const EditAction act{c.position, ids.at(c.new_surface), c.insert};
      const auto out = regenerate(strategy, fwd, bwd, initial, act, {}, {4, 6});
      scores.push_back(sentence_bleu_smoothed(surfaces(out.hypothesis.tokens), ref));
    }
    // Brute force over the two candidates.
    const std::size_t argmax = scores[1] > scores[0] ? 1 : 0;
    const auto best = pick_critical(scores, sentence_bleu_smoothed(surfaces(initial), ref));
    REQUIRE(best);
    CHECK(*best == argmax);
    picked[strategy] = candidates[*best];
    if (strategy == Strategy::kBiDir) CHECK(scores[1] == doctest::Approx(1.0));
  }
  CHECK(picked[Strategy::kBiDir].position == 1);  // the critical "y"
  CHECK(picked[Strategy::kUniDir].position == 0);  // leftmost error
  CHECK(picked[Strategy::kUniDirGrid].position == 0);
}

TEST_CASE("the oracle never picks a dominated candidate") {
  std::size_t applied = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto base = model_translating(600 + 20 * seed, "s1 s2 s3 s4", 3);
    for (const Strategy strategy : {Strategy::kBiDir, Strategy::kUniDirGrid, Strategy::kUniDir}) {
      Session s(base, plain_options(strategy), "a");
      const Round& r = s.translate("s1 s2 s3 s4");
      // Reference: the hypothesis with one word replaced and one inserted.
      Sentence ref = s.render(r.initial);
      if (ref.empty()) continue;
      ref[seed % ref.size()] = "t" + std::to_string((seed + 3) % 8);
      ref.insert(ref.begin() + static_cast<std::ptrdiff_t>(seed % (ref.size() + 1)), "newword");
      for (int step = 0; step < 3; ++step) {
        const auto all = oracle_candidates(s, 0, ref);
        const auto best = critical_revision_oracle(s, 0, ref);
        const double now = sentence_bleu_smoothed(s.render(s.round(0).current()), ref);
        if (!best) {
          for (const auto& c : all) CHECK(c.bleu <= now);
          break;
        }
        CHECK(best->bleu > now);
        for (const auto& c : all) CHECK(c.bleu <= best->bleu);
        const Round& after = s.revise(0, best->request);
        CHECK(s.render(after.current()) == best->output);
        CHECK(sentence_bleu_smoothed(s.render(after.current()), ref) > now);
        ++applied;
      }
    }
  }
  CHECK(applied > 10);
}

TEST_CASE("the oracle stops on a perfect hypothesis and fixes a single substitution") {
  const auto base = model_translating(700, "s1 s2 s3", 2);
  Session s(base, plain_options(), "a");
  const Sentence hyp = s.render(s.translate("s1 s2 s3").initial);
  CHECK_FALSE(critical_revision_oracle(s, 0, hyp));
  Sentence ref = hyp;
  ref.back() = ref.back() == "t0" ? "t1" : "t0";
  const auto all = oracle_candidates(s, 0, ref);
  REQUIRE(all.size() == 1);
  CHECK(all[0].request.position == hyp.size() - 1);
  CHECK(all[0].request.new_surface == ref.back());
  const auto best = critical_revision_oracle(s, 0, ref);
  if (all[0].bleu > sentence_bleu_smoothed(hyp, ref)) {
    REQUIRE(best);
    CHECK(best->request.position == hyp.size() - 1);
  } else {
    CHECK_FALSE(best);
  }
}

namespace {

// Test set whose references are the base model's own outputs with a few
// corruptions, so the oracle has real work and BLEU is far from zero.
ParallelCorpus perturbed_test_set(const TranslationModel& tm, std::uint64_t seed, std::size_t sessions,
                                  std::size_t per_session) {
  std::mt19937_64 rng(seed);
  ParallelCorpus c;
  auto shared = std::make_shared<const TranslationModel>(tm);
  Session probe(shared, plain_options(), "probe");
  for (std::size_t si = 0; si < sessions; ++si) {
    c.sessions.push_back({c.pairs.size(), per_session});
    for (std::size_t k = 0; k < per_session; ++k) {
      Sentence src = random_source(rng, 8, 3 + rng() % 4);
      Sentence ref = probe.render(probe.translate(src).initial);
      for (int e = 0; e < 2; ++e) {
        const std::size_t at = rng() % (ref.size() + 1);
        const std::string w = rng() % 3 == 0 ? "rare" + std::to_string(si) : "t" + std::to_string(rng() % 8);
        if (at < ref.size() && rng() % 2) ref[at] = w;
        else ref.insert(ref.begin() + static_cast<std::ptrdiff_t>(at), w);
      }
      c.pairs.push_back({src, ref});
    }
  }
  return c;
}

}  // namespace

TEST_CASE("ideal sessions: budget 0 is plain decoding and every applied revision raises sentence BLEU") {
  const auto base = random_translation_model(800);
  const ParallelCorpus test = perturbed_test_set(*base, 1, 3, 6);
  std::vector<Sentence> plain, refs;
  Session probe(base, plain_options(), "p");
  for (const auto& p : test.pairs) {
    plain.push_back(probe.render(probe.translate(p.source).initial));
    refs.push_back(p.target);
  }
  const double baseline = corpus_bleu(plain, refs);

  SimulationOptions zero;
  zero.max_revisions = 0;
  zero.session = plain_options();
  const auto m0 = run_ideal_session(base, test, zero);
  REQUIRE(m0.bleu.size() == 1);
  CHECK(m0.bleu[0] == baseline);
  CHECK(m0.average_revisions == 0.0);
  CHECK(m0.sentences == test.pairs.size());

  for (const Strategy strategy : {Strategy::kUniDir, Strategy::kUniDirGrid, Strategy::kBiDir}) {
    for (const bool memory : {false, true}) {
      SimulationOptions o;
      o.max_revisions = 3;
      o.session = plain_options(strategy);
      o.session.memory = memory;
      o.session.memory_threshold = 0;
      std::size_t traced = 0, changed = 0;
      o.on_sentence = [&](const SentenceTrace& t) {
        ++traced;
        REQUIRE(t.outputs.size() == 4);
        for (std::size_t k = 0; k + 1 < t.outputs.size(); ++k) {
          if (t.outputs[k + 1] == t.outputs[k]) continue;
          ++changed;
          CHECK(sentence_bleu_smoothed(t.outputs[k + 1], *t.reference) >
                sentence_bleu_smoothed(t.outputs[k], *t.reference));
        }
      };
      const auto m = run_ideal_session(base, test, o);
      const std::string name = strategy_name(strategy);
      INFO(name << " memory " << memory);
      REQUIRE(m.bleu.size() == 4);
      if (!memory) CHECK(m.bleu[0] == baseline);
      CHECK(traced == test.pairs.size());
      CHECK(changed > 0);
      CHECK(m.average_revisions <= 3.0);
      CHECK(m.unk.size() == 4);
    }
  }
}

TEST_CASE("online learning within a run and across sessions") {
  const auto base = random_translation_model(801);
  const ParallelCorpus test = perturbed_test_set(*base, 2, 2, 4);
  SimulationOptions o;
  o.max_revisions = 1;
  o.session = plain_options();
  const auto off = run_ideal_session(base, test, o);
  o.session.online_learning = true;
  o.session.online_lr = 0.05;
  const auto per_session = run_ideal_session(base, test, o);
  o.global_online = true;
  const auto global = run_ideal_session(base, test, o);
  CHECK(per_session.online_learning);
  // The first session is identical in every mode.
  CHECK(off.bleu.size() == global.bleu.size());
  CHECK(per_session.bleu != off.bleu);
  CHECK(global.second_half_bleu.size() == 2);
}

TEST_CASE("report formatting and structured round trip") {
  SimulationMetrics a;
  a.strategy = "bidir";
  a.memory = true;
  a.sentences = 10;
  a.bleu = {0.3, 0.5, 0.61};
  a.second_half_bleu = {0.31, 0.52, 0.6};
  a.unk = {4, 2, 1};
  a.average_revisions = 1.7;
  SimulationMetrics b = a;
  b.strategy = "unidir";
  b.memory = false;
  b.bleu = {0.3, 0.4};
  b.unk = {4, 3};
  const std::vector<SimulationMetrics> runs = {a, b};
  const std::string table = format_report(runs);
  CHECK(table.find("Δ") != std::string::npos);
  CHECK(table.find("bidir+mem") != std::string::npos);
  CHECK(table.find("+31.00") != std::string::npos);
  CHECK(table.find("+10.00") != std::string::npos);
  CHECK(metrics_from_json(metrics_to_json(runs)) == runs);
  CHECK_THROWS(format_report({}));
  CHECK_THROWS(metrics_to_json({}));
  CHECK_THROWS(metrics_from_json("[]"));
  CHECK_THROWS(run_ideal_session(random_translation_model(1), ParallelCorpus{}, {}));
}
