#pragma once

// LGF1 text dumps for node fields and cell masks.
//
//   LGF1 N=<n> dims=<d1,...,dn> h=<spacing> origin=<o1,...,on> components=<c> [key=value ...]
//
// followed by one record per node (fields) or per cell (masks) in row-major
// order, last axis fastest. Numbers are written in shortest round-trip form.

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"

namespace lusin::io {

struct LgfHeader {
  int n = 0;
  std::vector<int> dims;
  double h = 0.0;
  std::vector<double> origin;
  int components = 1;
  std::map<std::string, std::string> extra;
};

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(ErrorKind::io_error, "malformed number '" + std::string(s) + "'");
  return x;
}

inline int parse_int(std::string_view s) {
  int x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(ErrorKind::io_error, "malformed integer '" + std::string(s) + "'");
  return x;
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& s, Parse parse) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string::npos ? s.size() : comma;
    out.push_back(parse(std::string_view(s).substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T, class Fmt>
std::string join(const std::vector<T>& xs, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  return out;
}

inline void write_header(std::ostream& os, const LgfHeader& hd) {
  os << "LGF1 N=" << hd.n << " dims=" << join(hd.dims, [](int d) { return std::to_string(d); })
     << " h=" << format_double(hd.h) << " origin=" << join(hd.origin, format_double)
     << " components=" << hd.components;
  for (const auto& [k, v] : hd.extra) os << ' ' << k << '=' << v;
  os << '\n';
}

inline LgfHeader read_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::io_error, "missing LGF1 header");
  std::istringstream ls(line);
  std::string tok;
  ls >> tok;
  if (tok != "LGF1") fail(ErrorKind::io_error, "not an LGF1 file");
  LgfHeader hd;
  bool seen_n = false, seen_dims = false, seen_h = false, seen_origin = false, seen_c = false;
  while (ls >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) fail(ErrorKind::io_error, "malformed header token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "N") {
      hd.n = parse_int(val);
      seen_n = true;
    } else if (key == "dims") {
      hd.dims = parse_list<int>(val, parse_int);
      seen_dims = true;
    } else if (key == "h") {
      hd.h = parse_double(val);
      seen_h = true;
    } else if (key == "origin") {
      hd.origin = parse_list<double>(val, parse_double);
      seen_origin = true;
    } else if (key == "components") {
      hd.components = parse_int(val);
      seen_c = true;
    } else {
      hd.extra[key] = val;
    }
  }
  if (!(seen_n && seen_dims && seen_h && seen_origin && seen_c))
    fail(ErrorKind::io_error, "incomplete LGF1 header");
  if (static_cast<int>(hd.dims.size()) != hd.n || static_cast<int>(hd.origin.size()) != hd.n)
    fail(ErrorKind::io_error, "header dimension mismatch");
  return hd;
}

inline void write_field(std::ostream& os, const SampledField& f, std::map<std::string, std::string> extra = {}) {
  const GridDomain& d = f.domain();
  write_header(os, LgfHeader{d.dim(), d.node_dims(), d.h(), d.origin(), f.components(), std::move(extra)});
  for (std::size_t v = 0; v < d.node_count(); ++v) {
    const auto vals = f.at(v);
    for (std::size_t c = 0; c < vals.size(); ++c) {
      if (c) os << ' ';
      os << format_double(vals[c]);
    }
    os << '\n';
  }
}

inline void write_mask(std::ostream& os, const GridDomain& d, const CellMask& mask) {
  write_header(os, LgfHeader{d.dim(), d.cell_dims(), d.h(), d.origin(), 1, {}});
  for (auto m : mask) os << (m ? '1' : '0') << '\n';
}

inline std::vector<double> read_records(std::istream& is, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  std::string tok;
  while (out.size() < count && is >> tok) out.push_back(parse_double(tok));
  if (out.size() != count) fail(ErrorKind::io_error, "truncated LGF1 body");
  if (is >> tok) fail(ErrorKind::io_error, "trailing data after LGF1 body");
  return out;
}

/// Reads a node field; the domain is the full box spanned by the nodes, or
/// `mask` when given.
inline SampledField read_field(std::istream& is, LgfHeader* header_out = nullptr, const CellMask* mask = nullptr) {
  LgfHeader hd = read_header(is);
  std::vector<int> cells(hd.dims);
  std::size_t nodes = 1;
  for (int& c : cells) {
    nodes *= static_cast<std::size_t>(c);
    c -= 1;
  }
  auto values = read_records(is, nodes * static_cast<std::size_t>(hd.components));
  GridDomain domain(cells, hd.h, hd.origin, mask ? *mask : CellMask{});
  if (header_out) *header_out = hd;
  return SampledField(std::move(domain), hd.components, std::move(values));
}

inline CellMask read_mask(std::istream& is, LgfHeader* header_out = nullptr) {
  LgfHeader hd = read_header(is);
  if (hd.components != 1) fail(ErrorKind::io_error, "mask dump must have one component");
  std::size_t cells = 1;
  for (int c : hd.dims) cells *= static_cast<std::size_t>(c);
  const auto values = read_records(is, cells);
  CellMask mask(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    if (values[i] != 0.0 && values[i] != 1.0) fail(ErrorKind::io_error, "mask values must be 0 or 1");
    mask[i] = values[i] != 0.0 ? 1 : 0;
  }
  if (header_out) *header_out = hd;
  return mask;
}

}  // namespace lusin::io
