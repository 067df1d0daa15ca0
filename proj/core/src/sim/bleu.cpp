#include "imt/sim/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace imt {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(std::span<const std::string> words, std::size_t n) {
  NgramCounts out;
  if (words.size() < n) return out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++out[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                   words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

double brevity_penalty(const BleuStats& s) {
  if (s.hyp_len == 0) return 0.0;
  return std::exp(std::min(0.0, 1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len)));
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const Sentence> refs) {
  if (refs.empty()) throw std::invalid_argument("bleu: no reference");
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = refs.front().size();
  for (const auto& r : refs) {
    const auto diff = [&](std::size_t len) { return len > hyp.size() ? len - hyp.size() : hyp.size() - len; };
    if (diff(r.size()) < diff(s.ref_len) || (diff(r.size()) == diff(s.ref_len) && r.size() < s.ref_len)) {
      s.ref_len = r.size();
    }
  }
  for (std::size_t n = 1; n <= kBleuOrder; ++n) {
    const NgramCounts h = ngrams(hyp, n);
    NgramCounts clip;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngrams(r, n)) clip[g] = std::max(clip[g], c);
    }
    for (const auto& [g, c] : h) {
      const auto it = clip.find(g);
      s.matches[n - 1] += std::min(c, it == clip.end() ? 0 : it->second);
      s.totals[n - 1] += c;
    }
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  double log_sum = 0.0;
  for (std::size_t n = 0; n < kBleuOrder; ++n) {
    if (s.matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  return brevity_penalty(s) * std::exp(log_sum / static_cast<double>(kBleuOrder));
}

double corpus_bleu(std::span<const Sentence> hyps, std::span<const std::vector<Sentence>> refs) {
  if (hyps.empty()) throw std::invalid_argument("corpus_bleu: empty hypothesis set");
  if (hyps.size() != refs.size()) throw std::invalid_argument("corpus_bleu: hypothesis/reference count mismatch");
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += bleu_stats(hyps[i], refs[i]);
  return bleu_from_stats(total);
}

double corpus_bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  std::vector<std::vector<Sentence>> wrapped;
  wrapped.reserve(refs.size());
  for (const auto& r : refs) wrapped.push_back({r});
  return corpus_bleu(hyps, wrapped);
}

double sentence_bleu_smoothed(std::span<const std::string> hyp, std::span<const Sentence> refs) {
  const BleuStats s = bleu_stats(hyp, refs);
  if (s.matches[0] == 0) return 0.0;
  double log_sum = std::log(static_cast<double>(s.matches[0]) / static_cast<double>(s.totals[0]));
  for (std::size_t n = 1; n < kBleuOrder; ++n) {
    log_sum += std::log((static_cast<double>(s.matches[n]) + 1.0) / (static_cast<double>(s.totals[n]) + 1.0));
  }
  return brevity_penalty(s) * std::exp(log_sum / static_cast<double>(kBleuOrder));
}

double sentence_bleu_smoothed(std::span<const std::string> hyp, const Sentence& ref) {
  return sentence_bleu_smoothed(hyp, std::span<const Sentence>(&ref, 1));
}

}  // namespace imt
