// qfield command-line driver: run, verify, eigen, plot.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qfield/io.hpp"

namespace fs = std::filesystem;
using namespace qfield;

namespace {

void print_report(const VerificationReport& r) {
  std::printf("%-20s %-4s %12s %12s %10s %10s\n", "identity", "ok", "linf", "l2", "ratio_inf", "ratio_l2");
  for (const auto& e : r.entries) {
    auto ratio = [](const std::optional<double>& v) {
      char b[32];
      if (v)
        std::snprintf(b, sizeof b, "%.4f", *v);
      else
        std::snprintf(b, sizeof b, "-");
      return std::string(b);
    };
    std::printf("%-20s %-4s %12.4e %12.4e %10s %10s  %s\n", to_string(e.tag), e.pass ? "PASS" : "FAIL", e.linf, e.l2,
                ratio(e.ratio_linf).c_str(), ratio(e.ratio_l2).c_str(), e.tolerance.c_str());
  }
  for (const auto& n : r.notes) std::printf("note: %s\n", n.c_str());
  std::printf("%s\n", r.all_pass() ? "all selected identities pass" : "some identities FAIL");
}

int cmd_run(const std::string& path, const std::string& out_override) {
  const auto s = load_scenario(path);
  const fs::path dir = out_override.empty() ? fs::path(s.out_dir) : fs::path(out_override);
  const auto r = run_scenario(s);
  const auto m = write_outputs(r, s, dir);
  print_report(r.report);
  std::printf("wrote %zu files to %s (manifest.json)\n", m.entries.size(), dir.string().c_str());
  return r.report.all_pass() ? 0 : 1;
}

int cmd_verify(const std::string& path, const std::string& from) {
  const auto s = load_scenario(path);
  const auto report = from.empty() ? run_scenario(s).report : verify_from_outputs(s, from);
  print_report(report);
  return report.all_pass() ? 0 : 1;
}

int cmd_eigen(const std::string& path, std::size_t count) {
  const auto s = load_scenario(path);
  const auto rows = eigen_sweep(s, count);
  std::printf("%3s %20s %20s %12s %12s %20s %12s %20s\n", "n", "E_n", "exact", "residual", "E(x) spread", "Q mean",
              "Q spread", "hbar^2 k_n^2/(mL)");
  for (const auto& r : rows) {
    auto opt = [](const std::optional<double>& v) {
      char b[40];
      if (v)
        std::snprintf(b, sizeof b, "%.12g", *v);
      else
        std::snprintf(b, sizeof b, "-");
      return std::string(b);
    };
    std::printf("%3d %20.12g %20s %12.3e %12.3e %20.12g %12.3e %20s\n", r.n, r.energy, opt(r.exact).c_str(),
                r.residual, r.e_spread, r.q_mean, r.q_spread, opt(r.q_exact).c_str());
  }
  if (rows.size() > 1) {
    std::printf("Q(n)/Q(1):");
    for (const auto& r : rows) std::printf(" %.6f", r.q_mean / rows.front().q_mean);
    std::printf("\n");
  }
  return 0;
}

int cmd_plot(const std::string& table_path, const std::vector<std::string>& fields, const std::string& out_dir) {
  const auto t = read_field_table(table_path);
  const fs::path src(table_path);
  const fs::path dir = out_dir.empty() ? src.parent_path() : fs::path(out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  for (const auto& name : fields) {
    const auto label = parse_field_label(name);
    if (!label || *label == FieldLabel::custom) throw Error(ErrorCode::invalid_argument, "unknown field '" + name + "'");
    const fs::path out = dir / (src.stem().string() + "_" + name + ".svg");
    write_svg_plot(out, t, *label, name + " (" + src.filename().string() + ")");
    std::printf("%s\n", out.string().c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local quantum field extraction and identity verification for 1-D wave packets"};
  app.require_subcommand(1);

  std::string scenario, out_dir, from, table;
  std::size_t count = 4;
  std::vector<std::string> fields;

  auto* run = app.add_subcommand("run", "propagate a scenario, write field tables, report and plots");
  run->add_option("scenario", scenario, "scenario file")->required();
  run->add_option("--out", out_dir, "output directory (overrides out.dir)");

  auto* verify = app.add_subcommand("verify", "verify the selected identities; exit 0 iff all pass");
  verify->add_option("scenario", scenario, "scenario file")->required();
  verify->add_option("--from", from, "re-verify from the field tables of an earlier run")->check(CLI::ExistingDirectory);

  auto* eigen = app.add_subcommand("eigen", "stationary states: E_n, local-energy spread and Q(n)");
  eigen->add_option("scenario", scenario, "scenario file")->required();
  eigen->add_option("--n", count, "number of states")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "SVG line plots of columns of a field table");
  plot->add_option("table", table, "field table (csv)")->required()->check(CLI::ExistingFile);
  plot->add_option("--fields", fields, "fields to plot")->required()->delimiter(',');
  plot->add_option("--out", out_dir, "output directory (default: next to the table)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(scenario, out_dir);
    if (*verify) return cmd_verify(scenario, from);
    if (*eigen) return cmd_eigen(scenario, count);
    if (*plot) return cmd_plot(table, fields, out_dir);
  } catch (const Error& e) {
    std::cerr << "error " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
