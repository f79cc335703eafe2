#include "pem/text_io.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace pem {

namespace {

std::uint64_t parse_id(const std::string& token, std::size_t line) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != token.size() || token.front() == '-')
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": bad id '" + token + "'");
  return v;
}

}  // namespace

ListInput read_list(std::istream& in) {
  std::vector<std::pair<std::uint64_t, std::string>> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::istringstream fields(text);
    std::string id, next, extra;
    if (!(fields >> id)) continue;
    if (id.front() == '#') continue;
    if (!(fields >> next) || (fields >> extra))
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": expected `id successor`");
    rows.emplace_back(parse_id(id, line), next == "TAIL" ? std::string() : next);
    if (next != "TAIL") parse_id(next, line);
  }
  ListInput out;
  std::unordered_map<std::uint64_t, std::uint64_t> index;
  for (const auto& [id, next] : rows) {
    if (!index.emplace(id, out.ids.size()).second)
      throw Error(ErrorCode::ParseError, "duplicate id " + std::to_string(id));
    out.ids.push_back(id);
  }
  for (const auto& [id, next] : rows) {
    if (next.empty()) {
      out.succ.push_back(kTail);
      continue;
    }
    auto it = index.find(std::stoull(next));
    if (it == index.end()) throw Error(ErrorCode::ParseError, "unknown successor " + next);
    out.succ.push_back(it->second);
  }
  return out;
}

void write_list(std::ostream& out, const ListInput& list) {
  for (std::size_t i = 0; i < list.ids.size(); ++i) {
    out << list.ids[i] << ' ';
    if (list.succ[i] == kTail) {
      out << "TAIL\n";
    } else {
      out << list.ids[list.succ[i]] << '\n';
    }
  }
}

void write_ranks(std::ostream& out, const ListInput& list, const RankAssignment& ranks) {
  for (std::size_t i = 0; i < list.ids.size(); ++i) out << list.ids[i] << ' ' << ranks.at(i) << '\n';
}

std::vector<std::size_t> read_instance(std::istream& in) {
  std::size_t n = 0;
  if (!(in >> n)) throw Error(ErrorCode::ParseError, "missing N");
  std::vector<std::size_t> values(n);
  for (auto& v : values)
    if (!(in >> v)) throw Error(ErrorCode::ParseError, "expected " + std::to_string(n) + " values");
  return values;
}

void write_instance(std::ostream& out, const std::vector<std::size_t>& values) {
  out << values.size() << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << values[i];
  out << '\n';
}

}  // namespace pem
