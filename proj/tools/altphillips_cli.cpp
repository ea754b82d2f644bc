#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "altphillips/cli.hpp"

namespace ac = altphillips::cli;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int report(const ac::RunOutcome& o, bool print_result) {
  if (o.code == ac::kOk) {
    if (print_result) std::cout << o.result.dump(2) << "\n";
    std::cerr << "wrote " << o.dir.string() << "\n";
  } else {
    if (o.code == ac::kManifestError)
      std::cerr << o.message << "\n";
    else
      std::cerr << "numerical failure: " << o.message << "\n";
    if (print_result) std::cout << o.result.dump(2) << "\n";
  }
  return o.code;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;  // bare strings such as expressions or mode names
  }
}

struct DirectOptions {
  std::optional<double> gamma, s;
  std::optional<long> d;
  std::vector<std::string> sets, inputs;
  std::string out;
  long seed = 0;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical experiments for the Alt-Phillips free boundary problem"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ac::kVersion));

  std::string manifest_path, out_dir;
  auto* run = app.add_subcommand("run", "Run a JSON manifest");
  run->add_option("manifest", manifest_path, "Manifest file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  bool quiet = false;
  run->add_flag("--quiet", quiet, "Do not print result.json");

  auto* validate = app.add_subcommand("validate", "Check a manifest without running it");
  std::string validate_path;
  validate->add_option("manifest", validate_path, "Manifest file")->required()->check(CLI::ExistingFile);

  std::map<std::string, DirectOptions> direct;
  std::map<std::string, CLI::App*> direct_apps;
  for (const auto& name : ac::subcommands()) {
    auto& o = direct[name];
    auto* sub = app.add_subcommand(name, "Run '" + name + "' with parameters from flags");
    sub->add_option("--gamma", o.gamma, "Exponent gamma in (-2, 2)");
    sub->add_option("--s", o.s, "Weight exponent s > -1");
    sub->add_option("--d", o.d, "Dimension");
    sub->add_option("--set", o.sets, "Parameter key=value (value parsed as JSON, else string)");
    sub->add_option("--input", o.inputs, "Input file key=path");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Recorded seed");
    direct_apps[name] = sub;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::ifstream in(manifest_path);
      json raw;
      try {
        raw = json::parse(in);
      } catch (const json::parse_error& e) {
        std::cerr << "manifest error: " << manifest_path << " is not valid JSON: " << e.what() << "\n";
        return ac::kManifestError;
      }
      const auto o = ac::execute(raw, fs::absolute(manifest_path).parent_path(), out_dir);
      return report(o, !quiet);
    }
    if (*validate) {
      std::ifstream in(validate_path);
      json raw;
      try {
        raw = json::parse(in);
        ac::validate(raw, fs::absolute(validate_path).parent_path());
      } catch (const ac::ManifestError& e) {
        std::cerr << e.what() << "\n";
        return ac::kManifestError;
      } catch (const json::parse_error& e) {
        std::cerr << "manifest error: not valid JSON: " << e.what() << "\n";
        return ac::kManifestError;
      }
      std::cout << "ok\n";
      return ac::kOk;
    }
    for (const auto& [name, sub] : direct_apps) {
      if (!*sub) continue;
      const auto& o = direct[name];
      json params = json::object();
      if (o.gamma) params["gamma"] = *o.gamma;
      if (o.s) params["s"] = *o.s;
      if (o.d) params["d"] = *o.d;
      for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
          std::cerr << "manifest error: --set expects key=value, got '" << kv << "'\n";
          return ac::kManifestError;
        }
        params[kv.substr(0, eq)] = parse_value(kv.substr(eq + 1));
      }
      json inputs = json::object();
      for (const auto& kv : o.inputs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
          std::cerr << "manifest error: --input expects key=path, got '" << kv << "'\n";
          return ac::kManifestError;
        }
        inputs[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      json raw = {{"subcommand", name}, {"seed", o.seed}, {"parameters", params}};
      if (!inputs.empty()) raw["inputs"] = inputs;
      if (!o.out.empty()) raw["output_dir"] = o.out;
      return report(ac::execute(raw, fs::current_path()), true);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ac::kNumericalFailure;
  }
  return ac::kOk;
}
