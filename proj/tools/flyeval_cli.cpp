// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The flyeval Authors

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flyeval/errors.hpp"
#include "flyeval/evaluate.hpp"
#include "flyeval/policy.hpp"
#include "flyeval/report.hpp"
#include "flyeval/rvf.hpp"
#include "flyeval/sim.hpp"
#include "flyeval/study.hpp"
#include "flyeval/synth.hpp"
#include "flyeval/textio.hpp"
#include "flyeval/trajcore.hpp"

namespace fe = flyeval;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string resolved_config(const CLI::App& app) { return app.config_to_str(true, false); }

std::optional<fe::Sex> parse_sex_tag(const std::string& s) {
  if (s == "any") return std::nullopt;
  return fe::parse_sex(s);
}

std::optional<fe::BinCodec> load_codec(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return fe::BinCodec::parse(fe::textio::read_file(path));
}

std::shared_ptr<const fe::Policy> load_policy_ref(const std::string& ref, const fe::BinCodec* codec) {
  if (ref == "halt") return fe::make_baseline(fe::BaselineKind::halt);
  if (ref == "const") return fe::make_baseline(fe::BaselineKind::constant);
  return fe::load_policy(ref, codec);
}

// name=path binds one policy to both sexes; name=male,female binds each.
fe::ModelEntry parse_model(const std::string& spec, const fe::BinCodec* codec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("model must be name=path or name=male,female: " + spec);
  fe::ModelEntry m;
  m.name = spec.substr(0, eq);
  const std::string rest = spec.substr(eq + 1);
  const auto comma = rest.find(',');
  if (comma == std::string::npos) {
    m.male = m.female = load_policy_ref(rest, codec);
  } else {
    const std::string mp = rest.substr(0, comma), fp = rest.substr(comma + 1);
    if (!mp.empty() && mp != "none") m.male = load_policy_ref(mp, codec);
    if (!fp.empty() && fp != "none") m.female = load_policy_ref(fp, codec);
  }
  return m;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size() && !s.empty()) {
    const auto c = s.find(',', pos);
    const std::string part = s.substr(pos, c == std::string::npos ? std::string::npos : c - pos);
    if (!part.empty()) out.push_back(part);
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  return out;
}

fe::StudyServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flyeval: simulation and evaluation of multi-agent behavior models"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value config file; flags override it");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Global seed")->capture_default_str();

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_kind = "random-walk", synth_out;
  std::size_t agents = 4, frames = 1000, window = 3, pairs = 1;
  double fps = 30.0, radius = 20.0, drift = 0.0, step_sigma = 0.1, turn_sigma = 0.1;
  double speed = 0.15, follow = 3.0, pursuit = 1.0;
  synth->add_option("--kind", synth_kind)
      ->check(CLI::IsMember({"random-walk", "linear-dynamics", "chaser-chasee"}))
      ->capture_default_str();
  synth->add_option("--out,-o", synth_out)->required();
  synth->add_option("--agents", agents)->capture_default_str();
  synth->add_option("--frames", frames)->capture_default_str();
  synth->add_option("--fps", fps)->capture_default_str();
  synth->add_option("--arena-radius", radius)->capture_default_str();
  synth->add_option("--drift", drift)->capture_default_str();
  synth->add_option("--step-sigma", step_sigma)->capture_default_str();
  synth->add_option("--turn-sigma", turn_sigma)->capture_default_str();
  synth->add_option("--window", window, "linear-dynamics lag")->capture_default_str();
  synth->add_option("--pairs", pairs, "chaser-chasee pairs")->capture_default_str();
  synth->add_option("--speed", speed, "chasee speed, mm/frame")->capture_default_str();
  synth->add_option("--follow", follow, "chaser follow distance, mm")->capture_default_str();
  synth->add_option("--pursuit", pursuit, "chaser pursuit gain in [0, 1]")->capture_default_str();

  // ---- train ----
  auto* train = app.add_subcommand("train", "Fit a policy");
  std::vector<std::string> train_data;
  std::string arch = "linear", sex_tag = "any", codec_path, train_out;
  fe::TrainingConfig tc;
  train->add_option("--data", train_data, "Training datasets (one per video)")->required();
  train->add_option("--arch", arch)->check(CLI::IsMember({"linear", "conv", "gru"}))->capture_default_str();
  train->add_option("--sex", sex_tag)->check(CLI::IsMember({"any", "male", "female"}))->capture_default_str();
  train->add_option("--codec", codec_path, "Codec file; fitted and saved when missing");
  train->add_option("--window", tc.window)->capture_default_str();
  train->add_option("--iterations", tc.iterations)->capture_default_str();
  train->add_option("--lr", tc.learning_rate)->capture_default_str();
  train->add_option("--l2", tc.l2)->capture_default_str();
  train->add_option("--batch", tc.batch_size)->capture_default_str();
  train->add_option("--width", tc.width)->capture_default_str();
  train->add_option("--out,-o", train_out)->required();

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "Closed-loop rollout");
  std::string sim_data, sim_mode = "smsf", sim_male, sim_female, sim_codec, sim_out;
  fe::SimConfig sc;
  simulate->add_option("--data", sim_data)->required();
  simulate->add_option("--mode", sim_mode)->check(CLI::IsMember({"smsf", "rmsf", "smrf", "loo", "replay"}))->capture_default_str();
  simulate->add_option("--loo-agent", sc.loo_agent)->capture_default_str();
  simulate->add_option("--start", sc.start)->capture_default_str();
  simulate->add_option("--horizon", sc.horizon)->capture_default_str();
  simulate->add_option("--male", sim_male, "Policy file, halt or const");
  simulate->add_option("--female", sim_female, "Policy file, halt or const");
  simulate->add_option("--codec", sim_codec);
  simulate->add_option("--out,-o", sim_out)->required();

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "Score models against a test recording");
  std::string ev_test, ev_ref, ev_codec, ev_metrics, ev_out, ev_variant = "raw", ev_loss = "least-squares";
  std::vector<std::string> ev_models;
  fe::EvaluateConfig ec;
  std::size_t ev_horizon = 0;
  bool no_baselines = false;
  evaluate->add_option("--test", ev_test)->required();
  evaluate->add_option("--reference", ev_ref, "Second recording of the same population (TRAIN-DATA row)");
  evaluate->add_option("--model", ev_models, "name=path or name=male,female");
  evaluate->add_option("--codec", ev_codec);
  evaluate->add_option("--metrics", ev_metrics, "Comma-separated subset of the report metrics");
  evaluate->add_option("--long-n", ec.long_n)->capture_default_str();
  evaluate->add_option("--samples", ec.samples)->capture_default_str();
  evaluate->add_option("--stride", ec.stride)->capture_default_str();
  evaluate->add_option("--sim-start", ec.sim_start)->capture_default_str();
  evaluate->add_option("--sim-horizon", ev_horizon, "0 runs to the end of the recording")->capture_default_str();
  evaluate->add_option("--disc-variant", ev_variant)->capture_default_str();
  evaluate->add_option("--disc-loss", ev_loss)->capture_default_str();
  evaluate->add_option("--disc-epochs", ec.disc.epochs)->capture_default_str();
  evaluate->add_option("--max-windows", ec.windows.max_per_class)->capture_default_str();
  evaluate->add_flag("--no-baselines", no_baselines);
  evaluate->add_option("--out,-o", ev_out)->required();

  // ---- disc-train ----
  auto* disc = app.add_subcommand("disc-train", "Train a real-vs-fake discriminator");
  std::string dt_real, dt_out, dt_variant = "raw", dt_loss = "least-squares";
  std::vector<std::string> dt_fakes;
  fe::DiscConfig dc;
  fe::WindowSetConfig wc;
  disc->add_option("--real", dt_real)->required();
  disc->add_option("--fake", dt_fakes)->required();
  disc->add_option("--variant", dt_variant)->capture_default_str();
  disc->add_option("--loss", dt_loss)->capture_default_str();
  disc->add_option("--epochs", dc.epochs)->capture_default_str();
  disc->add_option("--lr", dc.learning_rate)->capture_default_str();
  disc->add_option("--l2", dc.l2)->capture_default_str();
  disc->add_option("--batch", dc.batch_size)->capture_default_str();
  disc->add_option("--max-windows", wc.max_per_class)->capture_default_str();
  disc->add_option("--out,-o", dt_out)->required();

  // ---- make-pool ----
  auto* make_pool = app.add_subcommand("make-pool", "Build a clip pool for the human study");
  std::string mp_data, mp_codec, mp_out;
  std::vector<std::string> mp_models;
  fe::PoolConfig pc;
  make_pool->add_option("--data", mp_data)->required();
  make_pool->add_option("--model", mp_models, "name=path or name=male,female")->required();
  make_pool->add_option("--codec", mp_codec);
  make_pool->add_option("--n-real", pc.n_real)->capture_default_str();
  make_pool->add_option("--n-fake", pc.n_fake_per_model)->capture_default_str();
  make_pool->add_option("--loo-fraction", pc.loo_fraction)->capture_default_str();
  make_pool->add_option("--out,-o", mp_out)->required();

  // ---- serve ----
  auto* serve = app.add_subcommand("serve", "Serve the human study API");
  std::string sv_pool, sv_host = "127.0.0.1", sv_raters, sv_log;
  int sv_port = 8080;
  serve->add_option("--pool", sv_pool)->required();
  serve->add_option("--host", sv_host)->capture_default_str();
  serve->add_option("--port", sv_port)->capture_default_str();
  serve->add_option("--raters", sv_raters, "Comma-separated rater ids; empty allows any");
  serve->add_option("--log", sv_log, "Append-only label log, replayed at startup");

  // ---- report ----
  auto* report = app.add_subcommand("report", "Render a metric report");
  std::string rp_in;
  report->add_option("--in,-i", rp_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      fe::Dataset d;
      if (synth_kind == "random-walk") {
        fe::RandomWalkParams p;
        p.agents = agents, p.frames = frames, p.fps = fps, p.arena_radius = radius;
        p.drift = drift, p.step_sigma = step_sigma, p.turn_sigma = turn_sigma;
        d = fe::synth_random_walk(p, seed);
      } else if (synth_kind == "linear-dynamics") {
        fe::LinearDynamicsParams p;
        p.agents = agents, p.frames = frames, p.fps = fps, p.window = window;
        d = fe::synth_linear_dynamics(p, seed);
      } else {
        fe::ChaserParams p;
        p.pairs = pairs, p.frames = frames, p.fps = fps, p.arena_radius = radius;
        p.speed = speed, p.turn_sigma = turn_sigma, p.follow_distance = follow, p.pursuit = pursuit;
        d = fe::synth_chaser_chasee(p, seed);
      }
      d.provenance["config"] = resolved_config(app);
      fe::save_dataset(d, synth_out);
    } else if (*train) {
      std::vector<fe::Dataset> data;
      for (const auto& p : train_data) data.push_back(fe::load_dataset(p));
      tc.seed = seed;
      const auto sex = parse_sex_tag(sex_tag);
      std::shared_ptr<const fe::Policy> policy;
      if (arch == "linear") {
        policy = fe::train_linear(data, tc, sex);
      } else {
        if (codec_path.empty()) throw UsageError("--codec is required for categorical policies");
        fe::BinCodec codec;
        if (std::filesystem::exists(codec_path)) {
          codec = fe::BinCodec::parse(fe::textio::read_file(codec_path));
        } else {
          std::vector<fe::MotionDelta> samples;
          for (const auto& d : data) {
            const auto s = fe::motion_samples(d);
            samples.insert(samples.end(), s.begin(), s.end());
          }
          codec = fe::fit_bins(samples, fe::dataset_hash(data.front()));
          fe::textio::write_file(codec_path, codec.serialize());
        }
        const auto r = fe::train_categorical(data, fe::parse_arch(arch), codec, tc, sex);
        if (!r.loss_trace.empty()) std::cout << "final batch loss " << fe::textio::format_double(r.loss_trace.back()) << '\n';
        policy = r.policy;
      }
      fe::save_policy(*policy, train_out);
      fe::textio::write_file(train_out + ".config", resolved_config(app));
    } else if (*simulate) {
      const fe::Dataset d = fe::load_dataset(sim_data);
      const auto codec = load_codec(sim_codec);
      const fe::BinCodec* cp = codec ? &*codec : nullptr;
      sc.mode = fe::parse_sim_mode(sim_mode);
      sc.seed = seed;
      if (!sim_male.empty()) sc.male_policy = load_policy_ref(sim_male, cp);
      if (!sim_female.empty()) sc.female_policy = load_policy_ref(sim_female, cp);
      fe::Dataset out = fe::rollout(d, sc);
      out.provenance["config"] = resolved_config(app);
      fe::save_dataset(out, sim_out);
    } else if (*evaluate) {
      const fe::Dataset test = fe::load_dataset(ev_test);
      std::optional<fe::Dataset> ref;
      if (!ev_ref.empty()) ref = fe::load_dataset(ev_ref);
      const auto codec = load_codec(ev_codec);
      std::vector<fe::ModelEntry> models;
      for (const auto& m : ev_models) models.push_back(parse_model(m, codec ? &*codec : nullptr));
      ec.metrics = split_commas(ev_metrics);
      if (ev_horizon > 0) ec.sim_horizon = ev_horizon;
      ec.disc.variant = fe::parse_disc_variant(ev_variant);
      ec.disc.loss = fe::parse_disc_loss(ev_loss);
      ec.disc.seed = fe::derive_seed(seed, 1);
      ec.windows.seed = fe::derive_seed(seed, 2);
      ec.seed = seed;
      ec.baselines = !no_baselines;
      fe::MetricReport rep = fe::evaluate(test, ref ? &*ref : nullptr, models, ec);
      rep.provenance["config"] = resolved_config(app);
      fe::textio::write_file(ev_out, fe::serialize_report(rep));
      std::cout << fe::render_report(rep);
    } else if (*disc) {
      const fe::Dataset real = fe::load_dataset(dt_real);
      std::vector<fe::Dataset> fakes;
      for (const auto& p : dt_fakes) fakes.push_back(fe::load_dataset(p));
      dc.variant = fe::parse_disc_variant(dt_variant);
      dc.loss = fe::parse_disc_loss(dt_loss);
      dc.seed = seed;
      wc.variant = dc.variant;
      wc.seed = fe::derive_seed(seed, 1);
      const fe::WindowSet set = fe::build_window_set(real, fakes, wc);
      const fe::DiscTraining tr = fe::train_discriminator(set, dc);
      const fe::Accuracy acc = fe::eval_discriminator(*tr.disc, set.test);
      std::cout << "test accuracy " << fe::textio::format_double(acc.overall) << " (real "
                << fe::textio::format_double(acc.real) << ", fake " << fe::textio::format_double(acc.fake)
                << ", n " << acc.n << ")\n";
      fe::textio::write_file(dt_out, fe::serialize_discriminator(*tr.disc));
      fe::textio::write_file(dt_out + ".config", resolved_config(app));
    } else if (*make_pool) {
      const fe::Dataset d = fe::load_dataset(mp_data);
      const auto codec = load_codec(mp_codec);
      std::vector<fe::ModelSpec> specs;
      for (const auto& m : mp_models) {
        const auto e = parse_model(m, codec ? &*codec : nullptr);
        specs.push_back({e.name, e.male, e.female});
      }
      pc.seed = seed;
      const fe::ClipPool pool = fe::generate_clip_pool(d, specs, pc);
      auto j = fe::pool_to_json(pool);
      j["config"] = resolved_config(app);
      fe::textio::write_file(mp_out, j.dump());
    } else if (*serve) {
      fe::StudyStore store(fe::load_pool(sv_pool), split_commas(sv_raters), sv_log);
      fe::StudyServer server(store);
      const int port = server.bind(sv_host, sv_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on " << sv_host << ':' << port << std::endl;
      server.serve();
      g_server = nullptr;
    } else if (*report) {
      std::cout << fe::render_report(fe::parse_report(fe::textio::read_file(rp_in)));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const fe::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const fe::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
