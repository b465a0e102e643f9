#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "npv/abstraction.hpp"

namespace npv {

namespace {

std::size_t parse_index(const std::string& token, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != token.size() || token.empty() || token[0] == '-')
    throw ValidationError("imdp file: bad " + what + " '" + token + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_imdp(const Imdp& m, std::ostream& os) {
  os << "npv-imdp 1\n";
  os << "states " << m.num_states << '\n';
  os << "actions " << m.actions.size();
  for (const auto& a : m.actions) os << ' ' << a;
  os << '\n';
  os << "propositions " << m.propositions.size();
  for (const auto& p : m.propositions) os << ' ' << p;
  os << '\n';
  if (m.sink) os << "sink " << *m.sink << '\n';
  else os << "sink none\n";
  if (m.grid) {
    const auto& g = *m.grid;
    os << "grid " << g.domain.dim();
    for (double v : g.domain.lower()) os << ' ' << format_double(v);
    for (double v : g.domain.upper()) os << ' ' << format_double(v);
    for (auto c : g.counts) os << ' ' << c;
    os << '\n';
  }
  for (std::size_t s = 0; s < m.labels.size(); ++s) {
    if (m.labels[s].empty()) continue;
    os << "label " << s;
    for (const auto& l : m.labels[s]) os << ' ' << l;
    os << '\n';
  }
  os << "provenance " << m.provenance.dump() << '\n';
  std::size_t count = 0;
  for (const auto& per_action : m.rows)
    for (const auto& row : per_action) count += row.size();
  os << "entries " << count << '\n';
  for (std::size_t a = 0; a < m.rows.size(); ++a)
    for (std::size_t s = 0; s < m.rows[a].size(); ++s)
      for (const auto& e : m.rows[a][s])
        os << a << ' ' << s << ' ' << e.col << ' ' << format_double(e.lo) << ' ' << format_double(e.up) << '\n';
  os << "end\n";
}

void write_imdp(const Imdp& m, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  write_imdp(m, os);
  if (!os) throw Error("write to '" + path.string() + "' failed");
}

Imdp read_imdp(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](std::istringstream& ls) -> bool {
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      std::string body = hash == std::string::npos ? line : line.substr(0, hash);
      if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
      ls = std::istringstream(body);
      return true;
    }
    return false;
  };
  auto fail = [&](const std::string& msg) -> void {
    throw ValidationError("imdp file line " + std::to_string(lineno) + ": " + msg);
  };

  std::istringstream ls;
  std::string key, tok;
  if (!next(ls) || !(ls >> key >> tok) || key != "npv-imdp" || tok != "1") fail("missing 'npv-imdp 1' header");

  Imdp m;
  bool have_states = false, have_actions = false, have_entries = false, done = false;
  std::size_t expected = 0, seen = 0;
  while (next(ls)) {
    ls >> key;
    if (have_entries && key != "end") {
      std::string sa = key, ss, sc, slo, sup;
      if (!(ls >> ss >> sc >> slo >> sup)) fail("entry needs five fields");
      const std::size_t a = parse_index(sa, "action index"), s = parse_index(ss, "row index"),
                        c = parse_index(sc, "column index");
      if (a >= m.actions.size() || s >= m.num_states) fail("entry outside the declared actions or states");
      m.rows[a][s].push_back(ImdpEntry{c, parse_double(slo), parse_double(sup)});
      ++seen;
      continue;
    }
    if (key == "states") {
      if (!(ls >> tok)) fail("states needs a count");
      m.num_states = parse_index(tok, "state count");
      have_states = true;
    } else if (key == "actions") {
      if (!(ls >> tok)) fail("actions needs a count");
      const std::size_t k = parse_index(tok, "action count");
      m.actions.resize(k);
      for (auto& a : m.actions)
        if (!(ls >> a)) fail("fewer action names than declared");
      have_actions = true;
    } else if (key == "propositions") {
      if (!(ls >> tok)) fail("propositions needs a count");
      m.propositions.resize(parse_index(tok, "proposition count"));
      for (auto& p : m.propositions)
        if (!(ls >> p)) fail("fewer proposition names than declared");
    } else if (key == "sink") {
      if (!(ls >> tok)) fail("sink needs an index or 'none'");
      if (tok != "none") m.sink = parse_index(tok, "sink index");
    } else if (key == "grid") {
      if (!(ls >> tok)) fail("grid needs a dimension");
      const std::size_t d = parse_index(tok, "grid dimension");
      std::vector<double> lo(d), hi(d);
      std::vector<std::size_t> counts(d);
      for (auto& v : lo)
        if (!(ls >> tok)) fail("grid record too short");
        else v = parse_double(tok);
      for (auto& v : hi)
        if (!(ls >> tok)) fail("grid record too short");
        else v = parse_double(tok);
      for (auto& v : counts)
        if (!(ls >> tok)) fail("grid record too short");
        else v = parse_index(tok, "grid count");
      m.grid = GridMeta{Box(lo, hi), counts};
    } else if (key == "label") {
      if (!have_states) fail("label before states");
      if (m.labels.size() != m.num_states) m.labels.assign(m.num_states, {});
      if (!(ls >> tok)) fail("label needs a state index");
      const std::size_t s = parse_index(tok, "state index");
      if (s >= m.num_states) fail("label references an unknown state");
      while (ls >> tok) m.labels[s].push_back(tok);
      std::sort(m.labels[s].begin(), m.labels[s].end());
    } else if (key == "provenance") {
      std::string rest;
      std::getline(ls, rest);
      try {
        m.provenance = nlohmann::json::parse(rest);
      } catch (const nlohmann::json::exception& e) {
        fail(std::string("bad provenance JSON: ") + e.what());
      }
    } else if (key == "entries") {
      if (!have_states || !have_actions) fail("entries before states and actions");
      if (!(ls >> tok)) fail("entries needs a count");
      expected = parse_index(tok, "entry count");
      if (m.labels.size() != m.num_states) m.labels.assign(m.num_states, {});
      m.rows.assign(m.actions.size(), std::vector<std::vector<ImdpEntry>>(m.num_states));
      have_entries = true;
    } else if (key == "end") {
      done = true;
      break;
    } else {
      fail("unknown record '" + key + "'");
    }
  }
  if (!done) throw ValidationError("imdp file: missing 'end' record");
  if (!have_entries) throw ValidationError("imdp file: missing 'entries' record");
  if (seen != expected)
    throw ValidationError("imdp file: declared " + std::to_string(expected) + " entries, found " + std::to_string(seen));
  m.validate();
  return m;
}

Imdp read_imdp(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open IMDP file '" + path.string() + "'");
  return read_imdp(is);
}

}  // namespace npv
