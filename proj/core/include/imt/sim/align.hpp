#pragma once

#include <span>
#include <string>
#include <vector>

namespace imt {

enum class EditKind { kMatch, kSubstitute, kDelete, kInsert };

const char* edit_kind_name(EditKind k);

/// One step of an edit script turning a hypothesis into a reference.
/// `hyp_index` is the hypothesis word for match/substitute/delete and the gap
/// before which the reference word goes for insert. `ref_index` is unused
/// (equal to the next reference word) for delete.
struct EditOp {
  EditKind kind = EditKind::kMatch;
  std::size_t hyp_index = 0;
  std::size_t ref_index = 0;

  bool operator==(const EditOp&) const = default;
};

/// Minimum edit distance alignment with unit costs. Among optimal scripts the
/// backtrace prefers match, then substitute, then delete, then insert.
template <typename T>
std::vector<EditOp> align(std::span<const T> hyp, std::span<const T> ref);

extern template std::vector<EditOp> align<std::string>(std::span<const std::string>, std::span<const std::string>);
extern template std::vector<EditOp> align<int>(std::span<const int>, std::span<const int>);

/// Number of non-match operations in a script.
std::size_t edit_distance(std::span<const EditOp> script);

}  // namespace imt
