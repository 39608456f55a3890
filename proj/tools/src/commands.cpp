#include "commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "json.hpp"
#include "propattest/attest/classifier.hpp"
#include "propattest/attest/roc.hpp"
#include "propattest/common/checksum.hpp"
#include "propattest/common/rng.hpp"
#include "propattest/data/dataset.hpp"
#include "propattest/hybrid/hybrid.hpp"
#include "propattest/model/mlp.hpp"
#include "propattest/model/shadow.hpp"
#include "propattest/proto/network.hpp"
#include "propattest/proto/protocol.hpp"
#include "propattest/robust/attack.hpp"
#include "propattest/version.hpp"

namespace propattest::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Output directory bookkeeping shared by every command.
class Run {
 public:
  Run(const Config& cfg, std::string command) : cfg_(cfg), command_(std::move(command)), out_(cfg.str("out_dir")) {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory " + out_.string() + ": " + ec.message());
    report_["command"] = command_;
    report_["config_hash"] = cfg.hash();
    json versions = json::object();
    versions["propattest"] = std::string(kVersion);
    for (const auto& [name, v] : kModuleVersions) versions[std::string(name)] = std::string(v);
    report_["versions"] = versions;
    report_["artifacts"] = json::object();
  }

  const fs::path& out() const { return out_; }
  json& report() { return report_; }
  json& timing() { return timing_; }

  fs::path path(const std::string& name) const { return out_ / name; }

  void artifact(const std::string& name, const Bytes& bytes) {
    write_file(path(name), bytes);
    report_["artifacts"][name] = sha256_hex(bytes);
  }
  void text_artifact(const std::string& name, const std::string& text) {
    write_text_file(path(name), text);
    report_["artifacts"][name] = sha256_hex(text);
  }

  Bytes load(const std::string& name) const {
    if (!fs::exists(path(name))) throw IoError("missing artifact " + path(name).string() + "; run the producing command first");
    return read_file(path(name));
  }

  int finish() {
    write_text_file(path(command_ + ".config"), cfg_.resolved());
    write_text_file(path(command_ + ".json"), report_.dump(2) + "\n");
    if (!timing_.empty()) write_text_file(path(command_ + ".timing.json"), timing_.dump(2) + "\n");
    std::cout << report_.dump(2) << "\n";
    return 0;
  }

 private:
  const Config& cfg_;
  std::string command_;
  fs::path out_;
  json report_ = json::object();
  json timing_ = json::object();
};

data::GeneratorParams generator(const Config& cfg) { return {cfg.real("mean_shift"), cfg.real("label_noise")}; }

data::PropertySpec spec_of(const Config& cfg) {
  try {
    return {cfg.rational("p_req"), cfg.count("window"), cfg.grid()};
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

model::TrainParams model_params(const Config& cfg) {
  return {cfg.count("model_epochs"), cfg.real("model_lr"), cfg.count("model_batch")};
}

std::vector<std::size_t> model_dims(const Config& cfg, std::size_t d) {
  std::vector<std::size_t> dims{d};
  for (auto h : cfg.counts("hidden")) dims.push_back(h);
  if (dims.size() < 2) throw ConfigError("key hidden must list at least one layer");
  dims.push_back(1);
  return dims;
}

model::ShadowConfig shadow_config(const Config& cfg) {
  model::ShadowConfig sc;
  sc.per_value = cfg.count("per_value");
  sc.records = cfg.count("n");
  sc.dim = cfg.count("d");
  sc.hidden = cfg.counts("hidden");
  sc.train = model_params(cfg);
  sc.generator = generator(cfg);
  sc.workers = std::max<std::size_t>(1, cfg.count("workers"));
  return sc;
}

attest::AttestorParams attestor_params(const Config& cfg) {
  attest::AttestorParams hp;
  hp.epochs = cfg.count("att_epochs");
  hp.learning_rate = cfg.real("att_lr");
  hp.batch_size = cfg.count("att_batch");
  hp.phi_hidden = cfg.counts("phi_hidden");
  hp.rho_hidden = cfg.counts("rho_hidden");
  return hp;
}

robust::AttackConfig attack_config(const Config& cfg, const std::string& eps_key) {
  robust::AttackConfig ac{cfg.real(eps_key), cfg.count("pgd_steps"), cfg.real("pgd_step_size")};
  try {
    ac.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return ac;
}

attest::CalibrationMode calibration_mode(const Config& cfg) {
  auto m = cfg.str("calibration");
  if (m == "fixed_far") return attest::CalibrationMode::kFixedFar;
  if (m == "fixed_frr") return attest::CalibrationMode::kFixedFrr;
  throw ConfigError("key calibration must be fixed_far or fixed_frr");
}

std::pair<model::ShadowCorpus, model::ShadowCorpus> corpus_split(const Config& cfg, const Run& run) {
  auto corpus = model::ShadowCorpus::deserialize(run.load("corpus.shc"));
  double frac = cfg.real("holdout_fraction");
  if (!(frac > 0.0 && frac < 1.0)) throw ConfigError("holdout_fraction must lie in (0, 1)");
  return model::split_corpus(corpus, 1.0 - frac, cfg.seed("split_seed"));
}

json rates_json(const attest::Rates& r) {
  return {{"far", r.far}, {"frr", r.frr}, {"tar", r.tar()}, {"trr", r.trr()}};
}

// Operating-point summary for the configured p_req.
json metrics_row(const attest::AttClassifier& clf, const std::vector<attest::LabeledFeature>& holdout,
                 const data::PropertySpec& spec) {
  auto roc = attest::evaluate(clf, holdout);
  std::vector<bool> pos;
  for (const auto& lf : holdout) pos.push_back(lf.positive);
  auto rates = attest::rates_at(attest::score_all(clf, holdout), pos, clf.threshold());
  return {{"p_req", spec.p_req().to_string()},
          {"window", spec.window()},
          {"threshold", clf.threshold()},
          {"tar", rates.tar()},
          {"trr", rates.trr()},
          {"eer", roc.eer},
          {"auc", roc.auc}};
}

proto::SessionConfig session_config(const Config& cfg) {
  proto::SessionConfig sc;
  sc.session_id = cfg.count("session_id");
  sc.spec = spec_of(cfg);
  sc.train = {cfg.count("secure_epochs"), cfg.real("secure_lr"), cfg.count("secure_batch"), cfg.seed("order_seed")};
  sc.frac_bits = static_cast<int>(cfg.integer("frac_bits"));
  if (sc.frac_bits < 1 || sc.frac_bits > 30) throw ConfigError("frac_bits must lie in [1, 30]");
  if (sc.train.batch_size == 0) throw ConfigError("secure_batch must be positive");
  return sc;
}

proto::Endpoints endpoints(const Config& cfg) {
  return {cfg.str("server1_addr"), cfg.str("server2_addr"), cfg.str("dealer_addr")};
}

json outcome_json(const proto::AttestationOutcome& o) {
  json j = {{"verdict", o.verdict ? 1 : 0}, {"aborted", o.aborted}, {"comm_bytes", o.comm_bytes}};
  if (o.aborted) j["abort_reason"] = o.abort_reason;
  if (!o.model_raw.empty()) {
    ByteWriter w;
    w.u64s(o.model_raw);
    j["model_sha256"] = sha256_hex(w.bytes());
    j["model_weights"] = o.model.layers().front().weights;
    j["model_bias"] = o.model.layers().front().bias;
  }
  json phases = json::array();
  for (const auto& p : o.phases)
    phases.push_back({{"phase", p.phase}, {"bytes_sent", p.bytes_sent}, {"bytes_received", p.bytes_received}});
  j["phases"] = phases;
  return j;
}

// Runs the four roles as child processes plus the verifier here.
proto::AttestationOutcome run_tcp_session(const data::LabeledDataset& ds, const model::MlpModel& init,
                                          const proto::SessionConfig& sc, const Config& cfg) {
  const auto ep = endpoints(cfg);
  const std::uint64_t dealer_seed = cfg.seed("dealer_seed"), prover_seed = cfg.seed("prover_seed");
  std::cout.flush();
  std::vector<pid_t> kids;
  auto spawn = [&](auto&& body) {
    pid_t pid = ::fork();
    if (pid < 0) throw Error("fork failed");
    if (pid == 0) {
      int code = 0;
      try {
        body();
      } catch (const std::exception& e) {
        std::cerr << "role failed: " << e.what() << "\n";
        code = 5;
      }
      std::cout.flush();
      ::_exit(code);
    }
    kids.push_back(pid);
  };
  spawn([&] { proto::run_dealer_role(ep, sc.session_id, dealer_seed); });
  spawn([&] { proto::run_server_role(1, sc, ep); });
  spawn([&] { proto::run_server_role(2, sc, ep); });
  spawn([&] { proto::run_prover_role(ds, init, sc, prover_seed, ep); });
  auto outcome = proto::run_verifier_role(sc, ep);
  for (pid_t pid : kids) {
    int status = 0;
    ::waitpid(pid, &status, 0);
  }
  return outcome;
}

int attest_infer(const Config& cfg, Run& run) {
  auto spec = spec_of(cfg);
  auto clf = attest::AttClassifier::deserialize(run.load("attestor_calibrated.fat"));
  auto ds = data::LabeledDataset::deserialize(run.load("dataset.ads"));
  auto trained = model::train_mlp(ds, model_dims(cfg, ds.dim()), model_params(cfg), cfg.seed("model_seed"));
  auto feature = model::extract_first_layer(trained.model);
  double score = clf.score(feature);
  auto [train, holdout] = corpus_split(cfg, run);
  auto& r = run.report();
  r["mode"] = "infer";
  r["property"] = data::compute_property(ds).to_string();
  r["in_window"] = data::in_window(spec, data::compute_property(ds));
  r["score"] = score;
  r["verdict"] = clf.accepts(feature) ? 1 : 0;
  r["prover_train_accuracy"] = trained.train_accuracy;
  r["metrics"] = metrics_row(clf, attest::label_corpus(holdout, spec), spec);
  return run.finish();
}

int attest_crypto(const Config& cfg, Run& run) {
  auto sc = session_config(cfg);
  const std::string role = cfg.str("role");
  const std::string transport = cfg.str("transport");
  if (transport != "inproc" && transport != "tcp") throw ConfigError("transport must be inproc or tcp");
  const auto ep = endpoints(cfg);

  if (role == "dealer") {
    run.report()["served"] = proto::run_dealer_role(ep, sc.session_id, cfg.seed("dealer_seed"));
    return run.finish();
  }
  if (role == "server1" || role == "server2") {
    auto res = proto::run_server_role(role == "server1" ? 1 : 2, sc, ep);
    run.report()["bytes"] = res.bytes;
    return run.finish();
  }

  auto ds = data::LabeledDataset::deserialize(run.load("dataset.ads"));
  auto init = model::MlpModel::initialize({ds.dim(), 1}, cfg.seed("model_seed"));
  if (role == "prover") {
    proto::run_prover_role(ds, init, sc, cfg.seed("prover_seed"), ep);
    return run.finish();
  }

  proto::AttestationOutcome outcome;
  if (role == "verifier") {
    outcome = proto::run_verifier_role(sc, ep);
  } else if (role != "all") {
    throw ConfigError("role must be all, prover, server1, server2, verifier or dealer");
  } else if (transport == "tcp") {
    outcome = run_tcp_session(ds, init, sc, cfg);
  } else {
    outcome = proto::run_outsourced(ds, init, sc, {cfg.seed("prover_seed"), cfg.seed("dealer_seed")})->outcome;
  }
  auto& r = run.report();
  r["mode"] = "crypto";
  r["transport"] = transport;
  r["property"] = data::compute_property(ds).to_string();
  r["in_window"] = data::count_in_window(sc.spec, ds.sensitive_count(), ds.size());
  r["outcome"] = outcome_json(outcome);
  // Process roles only see their own sockets.
  r["outcome"]["comm_bytes_scope"] = (transport == "tcp" || role == "verifier") ? "verifier_links" : "all_links";
  run.timing()["comp_seconds"] = outcome.comp_seconds;
  run.timing()["phases_csv"] = proto::phases_csv(outcome.phases);
  // Wall-clock column zeroed so the artifact stays reproducible.
  auto phases = outcome.phases;
  for (auto& p : phases) p.millis = 0.0;
  run.text_artifact("crypto_phases.csv", proto::phases_csv(phases));
  return run.finish();
}

// Cryptographic attestation of a fresh prover dataset at the case's grid value.
hybrid::CryptoResult crypto_case(const Config& cfg, const proto::SessionConfig& base, const Rational& ratio,
                                 std::uint64_t index) {
  const std::size_t n = cfg.count("crypto_n"), d = cfg.count("crypto_d");
  auto ds = data::sample_dataset(ratio, n, d, derive_seed(cfg.seed("data_seed"), "crypto-case", index),
                                 generator(cfg));
  auto init = model::MlpModel::initialize({d, 1}, derive_seed(cfg.seed("model_seed"), "crypto-case", index));
  proto::SessionConfig sc = base;
  sc.session_id = base.session_id + index;
  auto run = proto::run_outsourced(ds, init, sc,
                                   {derive_seed(cfg.seed("prover_seed"), index), derive_seed(cfg.seed("dealer_seed"), index)});
  hybrid::CryptoResult r;
  r.verdict = run->outcome.verdict;
  r.failed = run->outcome.aborted;
  r.failure = run->outcome.abort_reason;
  r.seconds = run->outcome.comp_seconds;
  r.bytes = static_cast<double>(run->outcome.comm_bytes);
  return r;
}

hybrid::CostModel cost_model(const Config& cfg, const proto::SessionConfig& sc, Run& run) {
  hybrid::CostModel cost;
  cost.omega_inf_seconds = cfg.real("omega_inf");
  bool measure = cfg.str("omega_crpt_comp") == "measured" || cfg.str("omega_crpt_comm") == "measured";
  if (measure) {
    auto probe = crypto_case(cfg, sc, sc.spec.p_req(), 1u << 30);
    cost.source = hybrid::CostSource::kMeasured;
    cost.omega_crpt_comp = probe.seconds;
    cost.omega_crpt_comm = probe.bytes;
  }
  if (cfg.str("omega_crpt_comp") != "measured") cost.omega_crpt_comp = cfg.real("omega_crpt_comp");
  if (cfg.str("omega_crpt_comm") != "measured") cost.omega_crpt_comm = cfg.real("omega_crpt_comm");
  run.report()["omega_source"] = measure ? "measured" : "configured";
  run.report()["omega_crpt_comm"] = cost.omega_crpt_comm;
  run.timing()["omega_crpt_comp"] = cost.omega_crpt_comp;
  return cost;
}

int attest_hybrid(const Config& cfg, Run& run, bool fixed_far) {
  auto spec = spec_of(cfg);
  auto sc = session_config(cfg);
  auto clf = attest::AttClassifier::deserialize(run.load("attestor_calibrated.fat"));
  auto [train, holdout] = corpus_split(cfg, run);
  std::vector<hybrid::AttestationCase> cases;
  for (std::size_t i = 0; i < holdout.entries.size(); ++i) {
    const auto& e = holdout.entries[i];
    cases.push_back({"holdout-" + std::to_string(i), e.feature, data::in_window(spec, holdout.grid[e.grid_index])});
  }
  hybrid::CryptoOracle crypto([&](std::size_t i) {
    return crypto_case(cfg, sc, holdout.grid[holdout.entries[i].grid_index], i);
  });
  auto cost = cost_model(cfg, sc, run);
  auto& r = run.report();
  r["mode"] = fixed_far ? "hybrid-far" : "hybrid-frr";
  r["metrics"] = metrics_row(clf, attest::label_corpus(holdout, spec), spec);

  if (fixed_far) {
    auto rep = hybrid::run_fixed_far(cases, clf, crypto, cost);
    r["n"] = rep.n;
    r["n_rejected"] = rep.n_rejected;
    r["inference"] = {{"far", rep.inference.far}, {"frr", rep.inference.frr}};
    r["final"] = {{"far", rep.final.far}, {"frr", rep.final.frr}};
    r["p_crpt"] = rep.p_crpt;
    r["expected_comm_bytes"] = rep.expected_comm_bytes;
    r["measured_comm_bytes"] = rep.measured_comm_bytes;
    r["warnings"] = rep.warnings;
    run.timing()["expected_comp_seconds"] = rep.expected_comp_seconds;
    run.timing()["measured_comp_seconds"] = rep.measured_comp_seconds;
    return run.finish();
  }

  std::size_t n_a = 0, z = 0;
  for (const auto& c : cases) {
    bool acc = clf.accepts(c.feature);
    n_a += acc;
    z += acc && !c.in_window;
  }
  hybrid::SpotCheckPlan plan{n_a, z, cfg.count("n_spchk"), cfg.seed("spot_seed")};
  if (plan.n_spot > n_a) throw ConfigError("n_spchk exceeds the " + std::to_string(n_a) + " accepted cases");
  auto rep = hybrid::run_fixed_frr(cases, clf, crypto, plan, cost);
  r["n"] = rep.n;
  r["n_accepted"] = rep.n_accepted;
  r["fa_estimate"] = z;
  r["n_spchk"] = plan.n_spot;
  r["inference"] = {{"far", rep.inference.far}, {"frr", rep.inference.frr}};
  r["final"] = {{"far", rep.final.far}, {"frr", rep.final.frr}};
  r["t_star"] = rep.predicted.t_star;
  r["fa_new"] = rep.predicted.fa_new;
  r["predicted_far"] = rep.predicted_far;
  r["p_spchk"] = rep.p_spchk;
  r["expected_comm_bytes"] = rep.expected_comm_bytes;
  r["warnings"] = rep.warnings;
  run.timing()["expected_comp_seconds"] = rep.expected_comp_seconds;
  // Seconds vary run to run; keep them out of the reproducible artifact.
  auto curve = rep.curve;
  for (auto& p : curve) p.expected_comp_seconds = p.n_spchk * cost.omega_crpt_comp / static_cast<double>(rep.n);
  run.timing()["tradeoff_csv"] = hybrid::curve_csv(curve);
  for (auto& p : curve) p.expected_comp_seconds = 0.0;
  run.text_artifact("tradeoff.csv", hybrid::curve_csv(curve));
  return run.finish();
}

}  // namespace

int cmd_synth(const Config& cfg) {
  Run run(cfg, "synth");
  auto ratio = cfg.rational("ratio");
  auto ds = data::sample_dataset(ratio, cfg.count("n"), cfg.count("d"), cfg.seed("data_seed"), generator(cfg));
  run.artifact("dataset.ads", ds.serialize());
  auto& r = run.report();
  r["ratio"] = ratio.to_string();
  r["n"] = ds.size();
  r["d"] = ds.dim();
  r["sensitive_count"] = ds.sensitive_count();
  r["property"] = data::compute_property(ds).to_string();
  return run.finish();
}

int cmd_shadows(const Config& cfg) {
  Run run(cfg, "shadows");
  auto grid = cfg.grid();
  auto corpus = model::build_shadow_corpus(grid, shadow_config(cfg), cfg.seed("shadow_seed"));
  run.artifact("corpus.shc", corpus.serialize());
  json counts = json::object();
  auto per = corpus.counts_per_value();
  for (std::size_t i = 0; i < grid.size(); ++i) counts[grid[i].to_string()] = per[i];
  run.report()["counts_per_value"] = counts;
  run.report()["entries"] = corpus.entries.size();
  return run.finish();
}

int cmd_train_attestor(const Config& cfg) {
  Run run(cfg, "train-attestor");
  auto spec = spec_of(cfg);
  auto [train, holdout] = corpus_split(cfg, run);
  auto trained = attest::train_attestor(train, spec, attestor_params(cfg), cfg.seed("attestor_seed"));
  run.artifact("attestor.fat", trained.classifier.serialize());
  auto roc = attest::evaluate(trained.classifier, attest::label_corpus(holdout, spec));
  run.text_artifact("roc.csv", attest::roc_csv(roc));
  auto& r = run.report();
  r["train_entries"] = train.entries.size();
  r["holdout_entries"] = holdout.entries.size();
  r["train_auc"] = trained.train_auc;
  r["auc"] = roc.auc;
  r["eer"] = roc.eer;
  r["eer_threshold"] = roc.eer_threshold;
  r["good"] = roc.auc >= attest::kGoodAuc;
  return run.finish();
}

int cmd_calibrate(const Config& cfg) {
  Run run(cfg, "calibrate");
  auto spec = spec_of(cfg);
  auto clf = attest::AttClassifier::deserialize(run.load("attestor.fat"));
  auto [train, holdout] = corpus_split(cfg, run);
  auto labeled = attest::label_corpus(holdout, spec);
  attest::Calibration cal;
  auto calibrated = attest::calibrate(clf, labeled, calibration_mode(cfg), cfg.real("level"), &cal);
  run.artifact("attestor_calibrated.fat", calibrated.serialize());
  auto& r = run.report();
  r["calibration"] = cfg.str("calibration");
  r["level"] = cfg.real("level");
  r["threshold"] = cal.threshold;
  r["achieved"] = rates_json(cal.achieved);
  r["degenerate"] = cal.degenerate;
  r["metrics"] = metrics_row(calibrated, labeled, spec);
  return run.finish();
}

int cmd_attest(const Config& cfg) {
  Run run(cfg, "attest");
  const std::string mode = cfg.str("mode");
  if (mode == "infer") return attest_infer(cfg, run);
  if (mode == "crypto") return attest_crypto(cfg, run);
  if (mode == "hybrid-far") return attest_hybrid(cfg, run, true);
  if (mode == "hybrid-frr") return attest_hybrid(cfg, run, false);
  throw ConfigError("mode must be infer, crypto, hybrid-far or hybrid-frr");
}

int cmd_attack(const Config& cfg) {
  Run run(cfg, "attack");
  auto spec = spec_of(cfg);
  auto victim = attest::AttClassifier::deserialize(run.load("attestor_calibrated.fat"));
  auto [train, holdout] = corpus_split(cfg, run);

  model::ShadowCorpus prover_corpus;
  if (fs::exists(run.path("prover_corpus.shc"))) {
    prover_corpus = model::ShadowCorpus::deserialize(run.load("prover_corpus.shc"));
  } else {
    prover_corpus = model::build_shadow_corpus(cfg.grid(), shadow_config(cfg), cfg.seed("prover_corpus_seed"));
  }
  run.artifact("prover_corpus.shc", prover_corpus.serialize());
  auto substitute = robust::train_substitute(prover_corpus, spec, attestor_params(cfg), cfg.seed("attack_seed"));
  const auto ac = attack_config(cfg, "epsilon");

  std::vector<robust::AttackRecord> records;
  model::ShadowCorpus attacked{holdout.grid, {}};
  std::size_t clean_fa = 0, attacked_fa = 0;
  for (std::size_t i = 0; i < holdout.entries.size(); ++i) {
    const auto& e = holdout.entries[i];
    if (data::in_window(spec, holdout.grid[e.grid_index])) continue;
    auto pert = robust::perturb_first_layer(e.feature, substitute.classifier, ac);
    robust::AttackRecord rec{"holdout-" + std::to_string(i), victim.score(e.feature), victim.score(pert.feature),
                             victim.accepts(e.feature), victim.accepts(pert.feature)};
    clean_fa += rec.accepted_before;
    attacked_fa += rec.accepted_after;
    records.push_back(rec);
    attacked.entries.push_back({pert.feature, e.grid_index});
  }
  if (records.empty()) throw ConfigError("holdout has no out-of-window models to attack");
  run.text_artifact("attack.csv", robust::attack_report_csv(records));
  run.artifact("attacked_negatives.shc", attacked.serialize());

  // Frozen fine-tuning on prover models at the first out-of-window value.
  const auto grid = cfg.grid();
  auto neg = std::find_if(grid.begin(), grid.end(), [&](const Rational& g) { return !data::in_window(spec, g); });
  json ft = json::array();
  double gap = 0.0;
  for (std::size_t k = 0; k < cfg.count("finetune_models"); ++k) {
    auto ds = data::sample_dataset(*neg, cfg.count("n"), cfg.count("d"),
                                   derive_seed(cfg.seed("attack_seed"), "finetune-data", k), generator(cfg));
    auto seed = derive_seed(cfg.seed("attack_seed"), "finetune-model", k);
    auto base = model::train_mlp(ds, model_dims(cfg, ds.dim()), model_params(cfg), seed);
    auto pert = robust::perturb_first_layer(model::extract_first_layer(base.model), substitute.classifier, ac);
    auto broken = base.model;
    model::install_first_layer(broken, pert.feature);
    auto tuned = robust::finetune_frozen(base.model, pert.feature, ds, model_params(cfg), seed);
    ft.push_back({{"clean_accuracy", base.train_accuracy},
                  {"perturbed_accuracy", model::accuracy(broken, ds)},
                  {"finetuned_accuracy", tuned.train_accuracy}});
    gap = std::max(gap, base.train_accuracy - tuned.train_accuracy);
  }

  const double n_neg = static_cast<double>(records.size());
  auto& r = run.report();
  r["epsilon"] = ac.epsilon;
  r["negatives"] = records.size();
  r["clean_far"] = clean_fa / n_neg;
  r["attacked_far"] = attacked_fa / n_neg;
  r["substitute_train_auc"] = substitute.train_auc;
  r["victim_auc"] = attest::evaluate(victim, attest::label_corpus(holdout, spec)).auc;
  r["finetune"] = ft;
  r["finetune_max_accuracy_gap"] = gap;
  return run.finish();
}

int cmd_defend(const Config& cfg) {
  Run run(cfg, "defend");
  auto spec = spec_of(cfg);
  auto victim = attest::AttClassifier::deserialize(run.load("attestor_calibrated.fat"));
  auto attacked = model::ShadowCorpus::deserialize(run.load("attacked_negatives.shc"));
  auto [train, holdout] = corpus_split(cfg, run);
  auto labeled = attest::label_corpus(holdout, spec);

  auto defended = robust::adversarial_train(train, spec, attack_config(cfg, "adv_epsilon"), attestor_params(cfg),
                                            cfg.seed("attestor_seed"));
  auto calibrated = attest::calibrate(defended.classifier, labeled, calibration_mode(cfg), cfg.real("level"));
  run.artifact("attestor_defended.fat", calibrated.serialize());

  auto far_on = [&](const attest::AttClassifier& clf) {
    std::size_t fa = 0;
    for (const auto& e : attacked.entries) fa += clf.accepts(e.feature);
    return attacked.entries.empty() ? 0.0 : static_cast<double>(fa) / attacked.entries.size();
  };
  const double u_clean = attest::evaluate(victim, labeled).auc;
  const double u_def = attest::evaluate(calibrated, labeled).auc;
  const double far_att = far_on(victim), far_def = far_on(calibrated);
  const bool green = (u_clean - u_def) < 0.05 * u_clean || far_def < 0.05;

  std::ostringstream csv;
  csv.precision(10);
  csv << "clean_utility,attacked_far,defended_utility,defended_far,green\n"
      << u_clean << ',' << far_att << ',' << u_def << ',' << far_def << ',' << (green ? 1 : 0) << '\n';
  run.text_artifact("defence.csv", csv.str());
  auto& r = run.report();
  r["clean_utility"] = u_clean;
  r["attacked_far"] = far_att;
  r["defended_utility"] = u_def;
  r["defended_far"] = far_def;
  r["green"] = green;
  return run.finish();
}

int cmd_report(const Config& cfg) {
  Run run(cfg, "report");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(run.out())) {
    auto name = entry.path().filename().string();
    if (entry.path().extension() == ".json" && name != "report.json" && name.find(".timing.") == std::string::npos)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  json sections = json::object();
  for (const auto& f : files) {
    auto bytes = read_file(f);
    try {
      sections[f.stem().string()] = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
      throw IoError("cannot parse " + f.string() + ": " + e.what());
    }
  }
  run.report()["sections"] = sections;
  return run.finish();
}

}  // namespace propattest::cli
