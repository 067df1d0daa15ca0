#include "imt/sim/align.hpp"

#include <algorithm>

namespace imt {

const char* edit_kind_name(EditKind k) {
  switch (k) {
    case EditKind::kMatch: return "match";
    case EditKind::kSubstitute: return "substitute";
    case EditKind::kDelete: return "delete";
    case EditKind::kInsert: return "insert";
  }
  return "unknown";
}

template <typename T>
std::vector<EditOp> align(std::span<const T> hyp, std::span<const T> ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  std::vector<EditOp> script;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && hyp[i - 1] == ref[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      script.push_back({EditKind::kMatch, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      script.push_back({EditKind::kSubstitute, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      script.push_back({EditKind::kDelete, i - 1, j});
      --i;
    } else {
      script.push_back({EditKind::kInsert, i, j - 1});
      --j;
    }
  }
  std::reverse(script.begin(), script.end());
  return script;
}

template std::vector<EditOp> align<std::string>(std::span<const std::string>, std::span<const std::string>);
template std::vector<EditOp> align<int>(std::span<const int>, std::span<const int>);

std::size_t edit_distance(std::span<const EditOp> script) {
  return static_cast<std::size_t>(
      std::count_if(script.begin(), script.end(), [](const EditOp& e) { return e.kind != EditKind::kMatch; }));
}

}  // namespace imt
