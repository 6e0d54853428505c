#include "oinn/cli/app.hpp"

#include <cstdlib>
#include <ostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "oinn/errors.hpp"
#include "settings.hpp"

namespace oinn::cli {

namespace {

// Flags given on the command line, keyed like the config file.
struct FlagLayer {
  json values = json::object();
  std::string config;
};

template <class T>
CLI::Option* flag(CLI::App* app, FlagLayer& layer, const std::string& name,
                  const std::string& key, const std::string& help) {
  return app->add_option_function<T>(
      name, [&layer, key](const T& v) { layer.values[key] = v; }, help);
}

void common_flags(CLI::App* app, FlagLayer& layer) {
  flag<std::string>(app, layer, "--example,-e", "example", "example id (1-6) or name");
  flag<std::string>(app, layer, "--out,-o", "out",
                    std::string("output directory (default: $") + kOutDirEnv + "/<command>-<id>)");
  app->add_option("--config", layer.config, "JSON config file, or a summary.json to re-run");
}

void train_flags(CLI::App* app, FlagLayer& layer) {
  flag<std::uint64_t>(app, layer, "--seed", "seed", "random seed");
  flag<std::size_t>(app, layer, "--iters", "iters", "training iterations");
  flag<std::size_t>(app, layer, "--batch", "batch", "time samples per iteration");
  flag<double>(app, layer, "--lr", "lr", "ADAM learning rate");
  flag<double>(app, layer, "--gamma", "gamma", "loss decay rate");
  flag<std::size_t>(app, layer, "--hidden", "hidden", "hidden layer width");
  flag<double>(app, layer, "--t-final", "t_final", "time horizon T");
  flag<std::size_t>(app, layer, "--cadence", "cadence", "score the solution every N iterations");
  flag<std::string>(app, layer, "--y0", "y0", "initial point, e.g. [1,2,3,4]");
}

std::string out_base() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : "oinn-out";
}

template <class S>
void default_out(S& s, const std::string& command) {
  if (s.out_dir.empty()) {
    s.out_dir = out_base() + "/" + command + "-" + std::to_string(s.example);
  }
}

std::string shell_echo(const std::vector<std::string>& args) {
  std::string s = "oinn";
  for (const std::string& a : args) {
    s += ' ';
    if (!a.empty() && a.find_first_of(" \t\"'$\\[]*?;&|<>()") == std::string::npos) {
      s += a;
      continue;
    }
    s += '\'';
    for (char c : a) s += c == '\'' ? std::string("'\\''") : std::string(1, c);
    s += '\'';
  }
  return s;
}

std::vector<json> layers_of(const FlagLayer& f, const std::string& command) {
  std::vector<json> layers;
  if (!f.config.empty()) layers.push_back(load_config_file(f.config, command));
  layers.push_back(f.values);
  return layers;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural-network and integrator solvers for projection equations"};
  app.name("oinn");
  app.require_subcommand(1);

  FlagLayer train_f, integrate_f, compare_f, sweep_f;
  CLI::App* list = app.add_subcommand("list", "print the registered examples as JSON");

  CLI::App* train = app.add_subcommand("train", "train the network on one example");
  common_flags(train, train_f);
  train_flags(train, train_f);

  CLI::App* integrate = app.add_subcommand("integrate", "integrate the example's dynamics to T");
  common_flags(integrate, integrate_f);
  flag<std::string>(integrate, integrate_f, "--method", "method", "euler, rk4, rk45 or rk23");
  flag<double>(integrate, integrate_f, "--step", "step", "fixed step size");
  flag<double>(integrate, integrate_f, "--rtol", "rtol", "adaptive relative tolerance");
  flag<double>(integrate, integrate_f, "--atol", "atol", "adaptive absolute tolerance");
  flag<std::size_t>(integrate, integrate_f, "--max-attempts", "max_attempts",
                    "adaptive step budget");
  flag<double>(integrate, integrate_f, "--t-final", "t_final", "final time T");
  flag<std::string>(integrate, integrate_f, "--y0", "y0", "initial point, e.g. [1,2,3,4]");
  flag<std::size_t>(integrate, integrate_f, "--max-rows", "max_rows", "trajectory rows to keep");

  CLI::App* compare =
      app.add_subcommand("compare", "network vs fixed-step integrator at matched budgets");
  common_flags(compare, compare_f);
  train_flags(compare, compare_f);
  flag<std::size_t>(compare, compare_f, "--seeds", "seeds", "number of seeds (from --seed)");
  flag<std::vector<std::size_t>>(compare, compare_f, "--budgets", "budgets",
                                 "iteration / collocation counts");
  flag<double>(compare, compare_f, "--step", "step", "integrator step between collocation points");

  CLI::App* sweep = app.add_subcommand("sweep", "repeat training across initial points or horizons");
  common_flags(sweep, sweep_f);
  train_flags(sweep, sweep_f);
  flag<std::string>(sweep, sweep_f, "--axis", "axis", "initial_point or time_range");
  // One literal per --value; CLI11 would otherwise split "[1,2]" into items.
  flag<std::vector<std::string>>(sweep, sweep_f, "--value", "values",
                                 "one cell: a vector literal or a horizon (repeatable)")
      ->allow_extra_args(false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string echo = shell_echo(args);
  try {
    if (*list) return cmd_list(out);
    if (*train) {
      TrainSettings s = train_settings(layers_of(train_f, "train"));
      default_out(s, "train");
      return cmd_train(s, echo, out);
    }
    if (*integrate) {
      IntegrateSettings s = integrate_settings(layers_of(integrate_f, "integrate"));
      default_out(s, "integrate");
      return cmd_integrate(s, echo, out);
    }
    if (*compare) {
      CompareSettings s = compare_settings(layers_of(compare_f, "compare"));
      default_out(s, "compare");
      return cmd_compare(s, echo, out);
    }
    SweepSettings s = sweep_settings(layers_of(sweep_f, "sweep"));
    default_out(s, "sweep");
    return cmd_sweep(s, echo, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace oinn::cli
