#include "app.hpp"

#include <functional>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "propattest/common/error.hpp"

namespace propattest::cli {

int run_app(int argc, char** argv) {
  CLI::App app{"Property attestation toolkit"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", overrides, "override a key, key=value (repeatable)");

  const std::map<std::string, std::pair<std::string, std::function<int(const Config&)>>> commands{
      {"synth", {"sample a labelled dataset at a given ratio", cmd_synth}},
      {"shadows", {"train the shadow model corpus", cmd_shadows}},
      {"train-attestor", {"train the attestation classifier", cmd_train_attestor}},
      {"calibrate", {"pick the attestor decision threshold", cmd_calibrate}},
      {"attest", {"attest a prover (infer, crypto, hybrid-far, hybrid-frr)", cmd_attest}},
      {"attack", {"evade the attestor with perturbed first layers", cmd_attack}},
      {"defend", {"adversarially train and re-evaluate the attestor", cmd_defend}},
      {"report", {"collect the per-command reports", cmd_report}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    Config cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.apply_env();
    const auto* sub = app.get_subcommands().front();
    return commands.at(sub->get_name()).second(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingFailure& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kExitTraining;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace propattest::cli
