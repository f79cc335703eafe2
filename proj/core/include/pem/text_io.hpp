#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pem/list_ranking.hpp"

namespace pem {

// `id successor` per line, successor `TAIL` for the last element. Ids are
// arbitrary unsigned integers; they are renumbered 0..N-1 in input order.
struct ListInput {
  std::vector<std::uint64_t> ids;   // external id of element i
  std::vector<std::uint64_t> succ;  // internal successor or kTail
};

ListInput read_list(std::istream& in);
void write_list(std::ostream& out, const ListInput& list);
// `id rank` per line, in input order.
void write_ranks(std::ostream& out, const ListInput& list, const RankAssignment& ranks);

// `N` on the first line, then N integers on the second.
std::vector<std::size_t> read_instance(std::istream& in);
void write_instance(std::ostream& out, const std::vector<std::size_t>& values);

}  // namespace pem
