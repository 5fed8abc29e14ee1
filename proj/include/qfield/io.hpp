#pragma once

// Output of a scenario run: one comma-separated field table per snapshot,
// a JSON report keyed by identity tag, SVG line plots and a manifest. Tables
// carry 17 significant digits, so re-reading them rebuilds the field set bit
// for bit and re-verification reproduces the residual norms exactly.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qfield/scenario.hpp"

namespace qfield {

inline constexpr const char* kFieldTableHeader = "x,w,phi,k,p,K,Kw,E,omega,j,Q,mask";

/// Bits of the mask column.
enum MaskBit : unsigned {
  mask_density = 1u << 0,
  mask_k = 1u << 1,
  mask_local = 1u << 2,  // p, K, Kw, E, j
  mask_q = 1u << 3,
  mask_omega = 1u << 4,
};

/// One field table as read back from disk.
struct FieldTable {
  std::vector<double> x, w, phi, k, p, K, Kw, E, omega, j, Q;
  std::vector<unsigned> mask;

  std::size_t size() const { return x.size(); }
  const std::vector<double>& column(FieldLabel l) const;
};

inline const std::vector<double>& FieldTable::column(FieldLabel l) const {
  switch (l) {
    case FieldLabel::w: return w;
    case FieldLabel::phi: return phi;
    case FieldLabel::k: return k;
    case FieldLabel::p: return p;
    case FieldLabel::K: return K;
    case FieldLabel::Kw: return Kw;
    case FieldLabel::E: return E;
    case FieldLabel::omega: return omega;
    case FieldLabel::j: return j;
    case FieldLabel::Q: return Q;
    case FieldLabel::custom: break;
  }
  throw Error(ErrorCode::invalid_argument, "field table has no custom column");
}

inline unsigned mask_bit(FieldLabel l) {
  switch (l) {
    case FieldLabel::w:
    case FieldLabel::phi: return mask_density;
    case FieldLabel::k: return mask_k;
    case FieldLabel::Q: return mask_q;
    case FieldLabel::omega: return mask_omega;
    default: return mask_local;
  }
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  return out;
}

inline void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

inline void make_dirs(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorCode::io_error, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

}  // namespace detail

/// omega may be null (first and last snapshot); its column is then 0 with
/// the omega bit clear.
inline void write_field_table(const std::filesystem::path& path, const FieldSet& f, const ObservableField* omega) {
  auto out = detail::open_for_write(path);
  out << kFieldTableHeader << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < f.mp.size(); ++i) {
    unsigned m = 0;
    if (f.mp.valid[i]) m |= mask_density;
    if (f.k.valid[i]) m |= mask_k;
    if (f.p.valid[i]) m |= mask_local;
    if (f.Q.valid[i]) m |= mask_q;
    if (omega && omega->valid[i]) m |= mask_omega;
    put(f.grid.x(i));
    for (double v : {f.mp.w[i], f.mp.phi[i], f.k.values[i], f.p.values[i], f.K.values[i], f.Kw.values[i],
                     f.E.values[i], omega ? omega->values[i] : 0.0, f.j.values[i], f.Q.values[i]}) {
      out << ',';
      put(v);
    }
    out << ',' << m << '\n';
  }
  detail::check_written(out, path);
}

inline FieldTable read_field_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read field table " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kFieldTableHeader)
    throw Error(ErrorCode::parse_error, path.string() + ": missing or wrong header");
  FieldTable t;
  std::vector<double>* cols[] = {&t.x, &t.w, &t.phi, &t.k, &t.p, &t.K, &t.Kw, &t.E, &t.omega, &t.j, &t.Q};
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const char* c = line.c_str();
    char* end = nullptr;
    for (auto* col : cols) {
      const double v = std::strtod(c, &end);
      if (end == c || *end != ',')
        throw Error(ErrorCode::parse_error, path.string() + ": malformed row " + std::to_string(row));
      col->push_back(v);
      c = end + 1;
    }
    const unsigned long m = std::strtoul(c, &end, 10);
    if (end == c || *end != '\0')
      throw Error(ErrorCode::parse_error, path.string() + ": malformed mask in row " + std::to_string(row));
    t.mask.push_back(static_cast<unsigned>(m));
  }
  return t;
}

/// Rebuilds the field set of one snapshot from its table.
inline FieldSet field_set_from_table(const FieldTable& t, const Grid& grid, double time) {
  const std::size_t n = grid.n_points;
  if (t.size() != n)
    throw Error(ErrorCode::scenario_mismatch, "field table has " + std::to_string(t.size()) + " rows, grid has " +
                                                  std::to_string(n) + " points");
  FieldSet f;
  f.time = time;
  f.grid = grid;
  f.mp.w = t.w;
  f.mp.phi = t.phi;
  f.mp.valid.resize(n);
  auto field = [&](FieldLabel label, const std::vector<double>& v, unsigned bit) {
    ObservableField o{label, v, std::vector<bool>(n)};
    for (std::size_t i = 0; i < n; ++i) o.valid[i] = (t.mask[i] & bit) != 0;
    return o;
  };
  for (std::size_t i = 0; i < n; ++i) f.mp.valid[i] = (t.mask[i] & mask_density) != 0;
  f.mp.dphi.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    if (f.mp.valid[i] && f.mp.valid[i - 1]) f.mp.dphi[i] = t.phi[i] - t.phi[i - 1];
  f.k = field(FieldLabel::k, t.k, mask_k);
  f.p = field(FieldLabel::p, t.p, mask_local);
  f.K = field(FieldLabel::K, t.K, mask_local);
  f.Kw = field(FieldLabel::Kw, t.Kw, mask_local);
  f.E = field(FieldLabel::E, t.E, mask_local);
  f.j = field(FieldLabel::j, t.j, mask_local);
  f.Q = field(FieldLabel::Q, t.Q, mask_q);
  return f;
}

inline nlohmann::ordered_json report_to_json(const VerificationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["all_pass"] = r.all_pass();
  nlohmann::ordered_json ids = nlohmann::ordered_json::object();
  for (const auto& e : r.entries) {
    ids[to_string(e.tag)] = {
        {"pass", e.pass},
        {"linf", e.linf},
        {"l2", e.l2},
        {"masked_probability", e.masked_probability},
        {"fine_linf", opt(e.fine_linf)},
        {"fine_l2", opt(e.fine_l2)},
        {"ratio_linf", opt(e.ratio_linf)},
        {"ratio_l2", opt(e.ratio_l2)},
        {"tolerance", e.tolerance},
        {"note", e.note},
    };
  }
  j["identities"] = ids;
  j["ehrenfest_boundary_warning"] = r.ehrenfest_boundary_warning;
  j["notes"] = r.notes;
  return j;
}

/// Line plot of one field against x as a standalone SVG document. Invalid
/// points break the polyline.
inline void write_svg_plot(const std::filesystem::path& path, const std::vector<double>& x,
                           const std::vector<double>& y, const std::vector<bool>& valid, const std::string& title) {
  constexpr double W = 640, H = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  double x0 = x.front(), x1 = x.back();
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (valid[i] && std::isfinite(y[i])) {
      y0 = std::min(y0, y[i]);
      y1 = std::max(y1, y[i]);
    }
  if (!(y0 <= y1)) y0 = y1 = 0.0;
  if (y1 - y0 < 1e-300 + 1e-12 * std::max(std::abs(y0), std::abs(y1))) {
    const double pad = std::max(1e-12, 1e-6 * std::abs(y0));
    y0 -= pad;
    y1 += pad;
  }
  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb); };

  auto out = detail::open_for_write(path);
  char buf[128];
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << ' ' << H << "\">\n"
      << "<title>" << title << "</title>\n"
      << "<desc>x from " << detail::format_double(x0) << " to " << detail::format_double(x1) << ", values from "
      << detail::format_double(y0) << " to " << detail::format_double(y1) << "</desc>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                ml, mt, W - ml - mr, H - mt - mb);
  out << buf;
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.4g", y1);
  out << "<text x=\"" << ml - 4 << "\" y=\"" << mt + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.4g", y0);
  out << "<text x=\"" << ml - 4 << "\" y=\"" << H - mb << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.4g", x0);
  out << "<text x=\"" << ml << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.4g", x1);
  out << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << buf << "</text>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">x</text>\n";

  bool open = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool ok = valid[i] && std::isfinite(y[i]);
    if (ok && !open) {
      out << "<polyline fill=\"none\" stroke=\"#1f4e9e\" stroke-width=\"1.2\" points=\"";
      open = true;
    } else if (!ok && open) {
      out << "\"/>\n";
      open = false;
    }
    if (ok) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x[i]), py(y[i]));
      out << buf;
    }
  }
  if (open) out << "\"/>\n";
  out << "</svg>\n";
  detail::check_written(out, path);
}

inline void write_svg_plot(const std::filesystem::path& path, const FieldTable& t, FieldLabel label,
                           const std::string& title) {
  const unsigned bit = mask_bit(label);
  std::vector<bool> valid(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) valid[i] = (t.mask[i] & bit) != 0;
  write_svg_plot(path, t.x, t.column(label), valid, title);
}

struct ManifestEntry {
  std::string kind;  // scenario, field_table, report, plot
  std::string path;  // relative to the output directory
  std::string run;   // base or refined (field tables)
  double time = 0.0;
};

struct Manifest {
  std::filesystem::path dir;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> tables(const std::string& run) const {
    std::vector<ManifestEntry> out;
    for (const auto& e : entries)
      if (e.kind == "field_table" && e.run == run) out.push_back(e);
    return out;
  }
};

inline nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json j{{"kind", e.kind}, {"path", e.path}};
    if (e.kind == "field_table") {
      j["run"] = e.run;
      j["time"] = e.time;
    }
    files.push_back(j);
  }
  return {{"files", files}};
}

inline Manifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  Manifest m;
  m.dir = dir;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& f : j.at("files")) {
      ManifestEntry e;
      e.kind = f.at("kind").get<std::string>();
      e.path = f.at("path").get<std::string>();
      if (e.kind == "field_table") {
        e.run = f.at("run").get<std::string>();
        e.time = f.at("time").get<double>();
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  return m;
}

namespace detail {

inline void write_history_tables(Manifest& m, const FieldHistory& fh, const std::string& run, const std::string& sub) {
  make_dirs(m.dir / sub);
  const std::size_t n = fh.snapshots.size();
  for (std::size_t t = 0; t < n; ++t) {
    std::optional<ObservableField> omega;
    if (t > 0 && t + 1 < n) omega = frequency_field(fh.snapshots[t - 1].mp, fh.snapshots[t + 1].mp, fh.dt_out);
    char name[32];
    std::snprintf(name, sizeof name, "snap_%05zu.csv", t);
    const std::string rel = sub + "/" + name;
    write_field_table(m.dir / rel, fh.snapshots[t], omega ? &*omega : nullptr);
    m.entries.push_back({"field_table", rel, run, fh.snapshots[t].time});
  }
}

}  // namespace detail

/// Writes scenario copy, field tables (base and refined), report, plots and
/// manifest.json into dir. Returns the manifest.
inline Manifest write_outputs(const ScenarioRun& r, const Scenario& s, const std::filesystem::path& dir) {
  detail::make_dirs(dir);
  Manifest m;
  m.dir = dir;

  {
    auto out = detail::open_for_write(dir / "scenario.cfg");
    out << serialize(s);
    detail::check_written(out, dir / "scenario.cfg");
    m.entries.push_back({"scenario", "scenario.cfg", "", 0.0});
  }

  const auto opts = field_options(s);
  const auto base = extract_history(r.run, opts);
  detail::write_history_tables(m, base, "base", "fields");
  if (r.refined) detail::write_history_tables(m, extract_history(*r.refined, opts), "refined", "refined");

  {
    auto out = detail::open_for_write(dir / "report.json");
    out << report_to_json(r.report).dump(2) << '\n';
    detail::check_written(out, dir / "report.json");
    m.entries.push_back({"report", "report.json", "", 0.0});
  }

  if (!s.plots.empty()) {
    detail::make_dirs(dir / "plots");
    const auto tables = m.tables("base");
    const std::pair<const ManifestEntry*, const char*> ends[] = {{&tables.front(), "t0"}, {&tables.back(), "tend"}};
    for (const auto& [entry, suffix] : ends) {
      const auto t = read_field_table(dir / entry->path);
      for (FieldLabel l : s.plots) {
        const std::string rel = std::string("plots/") + to_string(l) + "_" + suffix + ".svg";
        write_svg_plot(dir / rel, t, l, std::string(to_string(l)) + " at t = " + detail::format_double(entry->time));
        m.entries.push_back({"plot", rel, "", 0.0});
      }
    }
  }

  {
    auto out = detail::open_for_write(dir / "manifest.json");
    out << manifest_to_json(m).dump(2) << '\n';
    detail::check_written(out, dir / "manifest.json");
  }
  return m;
}

/// Field history of one run rebuilt from the tables listed in the manifest.
inline FieldHistory read_field_history(const Manifest& m, const Scenario& s, const std::string& run) {
  const Scenario sc = run == "refined" ? refined(s) : s;
  const Grid grid = sc.grid();
  FieldHistory h;
  h.dt_out = sc.dt_out;
  h.potential = eval_potential(sc.potential, grid);
  for (const auto& e : m.tables(run)) h.snapshots.push_back(field_set_from_table(read_field_table(m.dir / e.path), grid, e.time));
  if (h.snapshots.empty()) throw Error(ErrorCode::too_few_snapshots, "manifest lists no " + run + " field tables");
  return h;
}

/// Re-verification from written tables; norms match the in-memory report.
inline VerificationReport verify_from_outputs(const Scenario& s, const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  const auto base = read_field_history(m, s, "base");
  std::optional<FieldHistory> fine;
  if (s.refinement) fine = read_field_history(m, s, "refined");
  return build_report_from_fields(base, s.identities, fine ? &*fine : nullptr, report_options(s));
}

}  // namespace qfield
