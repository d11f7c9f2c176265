// Command-line front end: classification, fitting, scans, boundary sampling,
// validation, the W5 boundary solver and figure data.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trilocal/trilocal.hpp"

namespace {

using trilocal::json;

constexpr int kExitLocal = 0;
constexpr int kExitNonlocal = 10;
constexpr int kExitInvalid = 2;
constexpr int kExitSolver = 3;

struct Common {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double tol = trilocal::kDefaultIneqTol;
  bool json_out = false;
  bool csv_out = false;
  std::string out;
  std::string config_path;
};

std::uint64_t env_u64(const char* name, std::uint64_t fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(name);
    return x;
  } catch (const std::exception&) {
    throw trilocal::Error(trilocal::ErrorKind::InvalidInput,
                          std::string("environment variable ") + name + " is not an integer");
  }
}

std::vector<double> parse_list(const std::string& text, std::size_t n, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw trilocal::Error(trilocal::ErrorKind::InvalidInput,
                            std::string(what) + ": cannot parse '" + item + "'");
    }
  }
  if (v.size() != n)
    throw trilocal::Error(trilocal::ErrorKind::InvalidInput,
                          std::string(what) + " needs " + std::to_string(n) + " values");
  return v;
}

std::array<std::size_t, 3> parse_cards(const std::string& text) {
  const auto v = parse_list(text, 3, "--cards");
  std::array<std::size_t, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(v[i] >= 1) || v[i] != std::floor(v[i]))
      throw trilocal::Error(trilocal::ErrorKind::InvalidInput, "--cards must be positive integers");
    c[i] = static_cast<std::size_t>(v[i]);
  }
  return c;
}

/// Writes to --out if given, else stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_)
        throw trilocal::Error(trilocal::ErrorKind::InvalidInput, "cannot open '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw trilocal::Error(trilocal::ErrorKind::InvalidInput, "cannot write " + p.string());
  f << content;
}

// ---------------------------------------------------------------------------
// Figure data.

/// Points (e2, e3) on the E1 = 0 boundary curve: for each e3 the largest
/// sign change of the residual in e2, located by bisection.
std::string e1zero_boundary_csv(int n) {
  std::ostringstream os;
  os << "e1,e2,e3\n";
  auto f = [](double e2, double e3) -> std::optional<double> {
    const double u = (3 + e2 - std::abs(e3)) / 2;
    if (u * u < 2) return std::nullopt;
    return trilocal::e1zero_boundary_residual(e2, e3);
  };
  for (int i = 0; i <= n; ++i) {
    const double e3 = -1 + 2.0 * i / n;
    const int steps = 4000;
    std::optional<double> prev;
    double prev_e2 = 1;
    for (int k = 0; k <= steps; ++k) {
      const double e2 = 1 - 2.0 * k / steps;
      const auto v = f(e2, e3);
      if (v && prev && ((*v > 0) != (*prev > 0))) {
        double lo = e2, hi = prev_e2;
        const bool lo_pos = *v > 0;
        for (int it = 0; it < 100; ++it) {
          const double mid = 0.5 * (lo + hi);
          const auto m = f(mid, e3);
          if (!m) break;
          if ((*m > 0) == lo_pos) lo = mid; else hi = mid;
        }
        const trilocal::Correlators c{0.0, 0.5 * (lo + hi), e3};
        if (trilocal::is_valid(c, 1e-12))
          os << "0," << trilocal::format_double(c.e2) << ',' << trilocal::format_double(e3) << '\n';
        break;
      }
      prev = v;
      prev_e2 = e2;
    }
  }
  return os.str();
}

/// Both branches of the NSI bound on the plane E1 + E2 - E3 = 1.
std::string nsi_curve_csv(int n) {
  std::ostringstream os;
  os << "branch,e1,e2,e3\n";
  for (int sign : {+1, -1}) {
    for (int i = 0; i <= n; ++i) {
      const double e1 = -1 + 2.0 * i / n;
      const double root = std::sqrt(2 * std::pow(1 - e1, 3));
      const double e2 = 2 * e1 - 1 + sign * root;
      const trilocal::Correlators c{e1, e2, e1 + e2 - 1};
      if (!trilocal::is_valid(c, 1e-12)) continue;
      os << (sign > 0 ? "plus," : "minus,") << trilocal::format_double(c.e1) << ','
         << trilocal::format_double(c.e2) << ',' << trilocal::format_double(c.e3) << '\n';
    }
  }
  return os.str();
}

/// Scan panel with the fitted error, the NSI residual and the verdict.
std::string panel_csv(const trilocal::ScanReport& r, double tol) {
  std::ostringstream os;
  os << "e1,e2,e3,rms,nsi,verdict\n";
  for (const auto& p : r.grid) {
    os << trilocal::format_double(p.point.e1) << ',' << trilocal::format_double(p.point.e2) << ','
       << trilocal::format_double(p.point.e3) << ',' << trilocal::format_double(p.rms) << ','
       << trilocal::format_double(trilocal::nsi_residual(p.point)) << ','
       << trilocal::to_string(trilocal::classify(p.point, tol).label) << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triangle-network locality toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Common co;
  try {
    co.seed = env_u64("TRILOCAL_SEED", 0);
    co.threads = static_cast<unsigned>(env_u64("TRILOCAL_THREADS", 1));
  } catch (const trilocal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  app.add_option("--seed", co.seed, "Random seed (env TRILOCAL_SEED)");
  app.add_option("--threads", co.threads, "Worker threads (env TRILOCAL_THREADS)")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--tol", co.tol, "Inequality tolerance")->check(CLI::NonNegativeNumber);
  auto* json_flag = app.add_flag("--json", co.json_out, "JSON output");
  app.add_flag("--csv", co.csv_out, "CSV output")->excludes(json_flag);
  app.add_option("--out", co.out, "Output file or directory (figures)");
  app.add_option("--config", co.config_path, "JSON file with search configuration defaults")
      ->check(CLI::ExistingFile);

  // Point options.
  double e1 = 0, e2 = 0, e3 = 0;
  auto* classify = app.add_subcommand("classify", "Nonlocality tests on (E1, E2, E3)");
  classify->add_option("--e1", e1)->required();
  classify->add_option("--e2", e2)->required();
  classify->add_option("--e3", e3)->required();

  auto* w5cmd = app.add_subcommand("w5", "Boundary value f(E1, E2) of the fifth W inequality");
  w5cmd->add_option("--e1", e1)->required();
  w5cmd->add_option("--e2", e2)->required();
  int w5_grid = trilocal::w5::SolverOptions{}.grid;
  w5cmd->add_option("--grid", w5_grid, "Start grid per axis")->check(CLI::Range(2, 4096));

  // Search options shared by fit, scan and validate.
  std::string cards_text, method_text;
  int restarts = -1, max_iter = -1;
  double early_stop = -1;
  auto add_search = [&](CLI::App* c) {
    c->add_option("--cards", cards_text, "Source cardinalities, e.g. 3,3,3");
    c->add_option("--restarts", restarts)->check(CLI::PositiveNumber);
    c->add_option("--max-iter", max_iter)->check(CLI::PositiveNumber);
    c->add_option("--early-stop", early_stop, "Stop once best rms <= value")
        ->check(CLI::NonNegativeNumber);
    c->add_option("--method", method_text, "Local optimizer: lm or spg");
  };

  std::string target_text, behavior_text;
  auto* fit = app.add_subcommand("fit", "Fit a triangle-local model to a target");
  auto* tgt = fit->add_option("--target", target_text, "Correlators e1,e2,e3");
  fit->add_option("--behavior", behavior_text, "Eight probabilities p(a,b,c)")->excludes(tgt);
  add_search(fit);

  std::string plane_text;
  int res = 30;
  auto* scan = app.add_subcommand("scan", "Fit every grid point of a plane");
  scan->add_option("--plane", plane_text, "Equation such as 'E1=0' or anchors:Dplus,Dminus,W")
      ->required();
  scan->add_option("--res", res, "Grid intervals per axis")->check(CLI::Range(1, 1000));
  add_search(scan);

  std::string family_text = "ghz";
  std::size_t n = 10;
  auto* sample = app.add_subcommand("sample-boundary", "Sample a boundary family");
  sample->add_option("--family", family_text)->required();
  sample->add_option("--n", n)->check(CLI::PositiveNumber);

  double disp = 1e-3;
  auto* validate = app.add_subcommand("validate", "Boundary validation by displaced fits");
  validate->add_option("--family", family_text)->required();
  validate->add_option("--n", n)->check(CLI::PositiveNumber);
  validate->add_option("--disp", disp)->check(CLI::PositiveNumber);
  add_search(validate);

  int fig_res = 30, fig_n = 200;
  auto* figures = app.add_subcommand("figures", "Write the data behind every figure panel");
  figures->add_option("--res", fig_res, "Grid intervals per axis for scans")
      ->check(CLI::Range(1, 1000));
  figures->add_option("--n", fig_n, "Boundary samples per family")->check(CLI::PositiveNumber);
  add_search(figures);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    // Resolved search configuration: defaults < --config < flags.
    trilocal::SearchConfig cfg;
    if (validate->parsed()) cfg.cards = {6, 6, 6};
    if (!co.config_path.empty()) {
      std::ifstream f(co.config_path);
      json j;
      try {
        f >> j;
      } catch (const json::exception& e) {
        throw trilocal::Error(trilocal::ErrorKind::InvalidInput,
                              std::string("config: ") + e.what());
      }
      trilocal::apply_config(j, cfg);
    }
    if (!cards_text.empty()) cfg.cards = parse_cards(cards_text);
    if (restarts > 0) cfg.restarts = restarts;
    if (max_iter > 0) cfg.max_iter = max_iter;
    if (early_stop >= 0) cfg.early_stop_rms = early_stop;
    if (!method_text.empty()) cfg.method = trilocal::parse_method(method_text);
    cfg.seed = co.seed;
    cfg.threads = co.threads;

    json echo{{"command", app.get_subcommands().front()->get_name()},
              {"seed", co.seed},
              {"threads", co.threads},
              {"tol", co.tol},
              {"format", co.json_out ? "json" : (co.csv_out ? "csv" : "default")},
              {"out", co.out}};

    if (classify->parsed()) {
      echo["point"] = trilocal::Correlators{e1, e2, e3};
      std::cerr << "config " << echo.dump() << '\n';
      const trilocal::Correlators c{e1, e2, e3};
      const auto v = trilocal::classify(c, co.tol);
      Output out(co.out);
      if (co.json_out) {
        out.stream() << json(v).dump(2) << '\n';
      } else {
        out.stream() << trilocal::to_string(v.label) << '\n';
      }
      if (v.label == trilocal::VerdictLabel::InvalidBehavior) return kExitInvalid;
      return v.nonlocal() ? kExitNonlocal : kExitLocal;
    }

    if (w5cmd->parsed()) {
      trilocal::w5::SolverOptions opt;
      opt.grid = w5_grid;
      echo["e1"] = e1;
      echo["e2"] = e2;
      echo["grid"] = opt.grid;
      std::cerr << "config " << echo.dump() << '\n';
      const auto s = trilocal::w5::f_w5(e1, e2, opt);
      Output out(co.out);
      if (co.json_out) {
        out.stream() << json(s).dump(2) << '\n';
      } else {
        out.stream() << trilocal::w5::to_string(s.status);
        if (s.status == trilocal::w5::W5Status::Feasible)
          out.stream() << " e3=" << trilocal::format_double(s.e3)
                       << " x=" << trilocal::format_double(s.x)
                       << " z=" << trilocal::format_double(s.z);
        out.stream() << '\n';
      }
      return s.status == trilocal::w5::W5Status::NotConverged ? kExitSolver : 0;
    }

    if (fit->parsed()) {
      trilocal::Behavior target;
      if (!behavior_text.empty()) {
        const auto p = parse_list(behavior_text, 8, "--behavior");
        std::copy(p.begin(), p.end(), target.p.begin());
        echo["behavior"] = target;
      } else if (!target_text.empty()) {
        const auto v = parse_list(target_text, 3, "--target");
        const trilocal::Correlators c{v[0], v[1], v[2]};
        if (!trilocal::is_valid(c, 1e-12))
          throw trilocal::Error(trilocal::ErrorKind::InvalidInput, "target is not a valid behavior");
        target = trilocal::correlators_to_behavior(c);
        echo["target"] = c;
      } else {
        throw trilocal::Error(trilocal::ErrorKind::InvalidInput, "fit needs --target or --behavior");
      }
      echo["search"] = cfg;
      std::cerr << "config " << echo.dump() << '\n';
      const auto r = trilocal::fit_model(target, cfg);
      std::cerr << "wall_seconds " << r.wall_seconds << '\n';
      Output out(co.out);
      if (co.json_out) {
        out.stream() << json(r).dump(2) << '\n';
      } else {
        out.stream() << "rms " << trilocal::format_double(r.error.rms) << " best_restart "
                     << r.best_restart << " local "
                     << (r.error.rms < cfg.local_threshold ? "yes" : "no") << '\n';
      }
      return 0;
    }

    if (scan->parsed()) {
      const auto plane = trilocal::parse_plane(plane_text);
      echo["plane"] = plane;
      echo["res"] = res;
      echo["search"] = cfg;
      std::cerr << "config " << echo.dump() << '\n';
      const auto r = trilocal::scan_plane(plane, res, cfg);
      Output out(co.out);
      if (co.json_out) {
        out.stream() << json(r).dump(2) << '\n';
      } else {
        trilocal::write_scan_csv(out.stream(), r);
      }
      return 0;
    }

    if (sample->parsed()) {
      const auto fam = trilocal::parse_family(family_text);
      echo["family"] = trilocal::to_string(fam);
      echo["n"] = n;
      std::cerr << "config " << echo.dump() << '\n';
      const auto s = trilocal::sample_boundary_with_params(fam, n, co.seed);
      Output out(co.out);
      if (co.json_out) {
        out.stream() << trilocal::samples_json(fam, s).dump(2) << '\n';
      } else {
        trilocal::write_samples_csv(out.stream(), fam, s);
      }
      return 0;
    }

    if (validate->parsed()) {
      const auto fam = trilocal::parse_family(family_text);
      echo["family"] = trilocal::to_string(fam);
      echo["n"] = n;
      echo["disp"] = disp;
      echo["search"] = cfg;
      std::cerr << "config " << echo.dump() << '\n';
      const auto r = trilocal::validate_boundary(fam, n, disp, cfg);
      Output out(co.out);
      if (co.csv_out) {
        trilocal::write_validation_csv(out.stream(), r);
      } else if (co.json_out) {
        out.stream() << json(r).dump(2) << '\n';
      } else {
        out.stream() << "violations " << r.violations << " displaced_below_threshold "
                     << r.displaced_below_threshold << " original_fit_fraction "
                     << trilocal::format_double(r.original_fit_fraction)
                     << " median_log10_ratio " << trilocal::format_double(r.median_log10_ratio)
                     << '\n';
      }
      return 0;
    }

    if (figures->parsed()) {
      if (co.out.empty())
        throw trilocal::Error(trilocal::ErrorKind::InvalidInput, "figures needs --out <directory>");
      echo["res"] = fig_res;
      echo["n"] = fig_n;
      echo["search"] = cfg;
      std::cerr << "config " << echo.dump() << '\n';
      const std::filesystem::path dir(co.out);
      std::filesystem::create_directories(dir);
      const std::vector<std::pair<std::string, std::string>> panels{
          {"plane_3e1+e3=0.csv", "3E1+E3=0"},
          {"plane_e1+e2-e3=1.csv", "E1+E2-E3=1"},
          {"plane_e1=0.csv", "E1=0"},
          {"plane_e1-2e2+e3=0.csv", "E1-2E2+E3=0"}};
      for (const auto& [file, eq] : panels) {
        const auto r = trilocal::scan_plane(trilocal::parse_plane(eq), fig_res, cfg);
        write_file(dir / file, panel_csv(r, co.tol));
        std::cerr << "wrote " << (dir / file).string() << '\n';
      }
      std::ostringstream boundary;
      bool header = true;
      for (bool flipped : {false, true}) {
        for (auto kind : trilocal::kAllFamilies) {
          const trilocal::FamilyId fam{kind, flipped};
          const auto s = trilocal::sample_boundary_with_params(
              fam, static_cast<std::size_t>(fig_n), co.seed);
          trilocal::write_samples_csv(boundary, fam, s, header);
          header = false;
        }
      }
      write_file(dir / "boundary_samples.csv", boundary.str());
      write_file(dir / "nsi_curve.csv", nsi_curve_csv(400));
      write_file(dir / "e1zero_boundary.csv", e1zero_boundary_csv(400));
      std::cerr << "wrote boundary_samples.csv nsi_curve.csv e1zero_boundary.csv\n";
      return 0;
    }
  } catch (const trilocal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == trilocal::ErrorKind::SolverFailure ? kExitSolver : kExitInvalid;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}
