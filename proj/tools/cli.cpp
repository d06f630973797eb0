#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>
#include <sstream>

#include "afford/core/errors.hpp"
#include "afford/core/formats.hpp"
#include "afford/evalkit/metrics.hpp"
#include "afford/evalkit/threshold.hpp"
#include "afford/mapgen/dataset.hpp"
#include "afford/refnet/checkpoint.hpp"
#include "afford/refnet/train.hpp"
#include "afford/simkit/scene.hpp"
#include "afford/transfer/transfer_table.hpp"

namespace afford::cli {

namespace fs = std::filesystem;

namespace {

// Bad flag values discovered after CLI11 accepted them.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wraps a load failure with the file it came from.
class FileError : public Error {
 public:
  FileError(const fs::path& path, const Error& inner)
      : Error(path.string() + ": " + inner.what()), kind_(inner.kind()) {}
  const char* kind() const noexcept override { return kind_.c_str(); }

 private:
  std::string kind_;
};

template <typename F>
auto from_file(const fs::path& path, F&& load) {
  try {
    return load(path);
  } catch (const FileError&) {
    throw;
  } catch (const Error& e) {
    throw FileError(path, e);
  }
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  const char* env = std::getenv("AFFORD_LOG");
  const std::string level = env == nullptr ? "info" : env;
  spdlog::level::level_enum lvl;
  if (level == "error") {
    lvl = spdlog::level::err;
  } else if (level == "warn") {
    lvl = spdlog::level::warn;
  } else if (level == "info") {
    lvl = spdlog::level::info;
  } else if (level == "debug") {
    lvl = spdlog::level::debug;
  } else {
    throw UsageError("AFFORD_LOG must be one of error, warn, info, debug (got '" + level + "')");
  }
  auto logger = std::make_shared<spdlog::logger>("afford", std::make_shared<spdlog::sinks::ostream_sink_st>(err));
  logger->set_level(lvl);
  logger->set_pattern("[%l] %v");
  return logger;
}

std::string json_error_line(const std::string& kind, const std::string& message) {
  return nlohmann::json{{"error", kind}, {"message", message}}.dump();
}

// Splices `--key value` pairs from a JSON config file in front of the user's
// flags. The last occurrence of a flag wins, so explicit flags override.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path) return args;

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(*config_path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file '" + *config_path + "': " + e.what());
  } catch (const Error& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config file '" + *config_path + "' must hold a JSON object");

  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    injected.push_back("--" + key);
    if (value.is_string()) {
      injected.push_back(value.get<std::string>());
    } else if (value.is_boolean()) {
      injected.push_back(value.get<bool>() ? "true" : "false");
    } else if (value.is_number()) {
      injected.push_back(value.dump());
    } else {
      throw UsageError("config key '" + key + "' must be a string, number or boolean");
    }
  }
  std::vector<std::string> out;
  auto first_flag = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) == 0; });
  out.insert(out.end(), args.begin(), first_flag);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), first_flag, args.end());
  return out;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  const auto x = text.find('x');
  std::size_t w = 0, h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument("no x");
    std::size_t used = 0;
    w = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("junk");
    h = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument("junk");
  } catch (const std::logic_error&) {
    throw UsageError("--size must look like 64x64 (got '" + text + "')");
  }
  if (w < simkit::kMinViewport || h < simkit::kMinViewport) {
    throw UsageError("--size must be at least 32x32 (got '" + text + "')");
  }
  return {w, h};
}

transfer::TransferTable load_table(const fs::path& path) {
  return from_file(path, [](const fs::path& p) { return transfer::parse_table(read_text_file(p)); });
}

mapgen::Manifest load_manifest(const fs::path& path) {
  return from_file(path, [](const fs::path& p) { return mapgen::read_manifest(p); });
}

std::vector<mapgen::Sample> load_all(const fs::path& manifest_path) {
  const auto manifest = load_manifest(manifest_path);
  return from_file(manifest_path, [&](const fs::path&) { return mapgen::load_samples(manifest); });
}

refnet::Checkpoint load_ckpt(const fs::path& path) {
  return from_file(path, [](const fs::path& p) { return refnet::load_checkpoint(p); });
}

std::string relative_to(const fs::path& target, const fs::path& base_dir) {
  return fs::relative(fs::absolute(target), fs::absolute(base_dir.empty() ? fs::path(".") : base_dir)).generic_string();
}

std::size_t channel_index(const std::string& name) {
  const auto a = find_affordance(name);
  if (!a) throw UsageError("unknown affordance '" + name + "'");
  return *a;
}

struct Options {
  std::string config;
  // simulate
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string size = "64x64";
  double room_mix = 0.5;
  std::string table;
  std::string out;
  // maps
  std::string labels, legend, out_prefix;
  // train
  std::string train, val;
  std::size_t k = 3;
  std::size_t depth = 3;
  std::size_t width = 8;
  bool masked = true;
  bool freeze_encoder = false;
  std::size_t epochs = 50;
  std::size_t batch = 4;
  std::size_t patience = 5;
  double lr = 1e-3;
  std::string history;
  // threshold / eval / report
  std::string pred, ckpt, data, thresholds, mode = "standard", pred_out, eval, overlay_out;
  std::string channels = "hook-pull,sit,break";
};

int cmd_simulate(const Options& o, std::ostream& out, spdlog::logger& log) {
  const auto [w, h] = parse_size(o.size);
  if (o.count < 1) throw UsageError("--count must be >= 1");
  if (!(o.room_mix >= 0.0 && o.room_mix <= 1.0)) throw UsageError("--room-mix must be in [0, 1]");
  const auto table = load_table(o.table);
  simkit::check_table_covers_catalog(table);
  simkit::DatasetSpec spec;
  spec.count = o.count;
  spec.seed = o.seed;
  spec.room_mix = o.room_mix;
  spec.width = w;
  spec.height = h;
  log.info("rendering {} scenes at {}x{} into {}", o.count, w, h, o.out);
  const auto manifest = simkit::generate_dataset(spec, table, o.out);
  out << manifest.string() << "\n";
  return kExitOk;
}

int cmd_maps(const Options& o, std::ostream& out, spdlog::logger&) {
  const auto table = load_table(o.table);
  const auto legend = from_file(o.legend, [](const fs::path& p) { return decode_legend(read_text_file(p)); });
  const auto labels = from_file(o.labels, [&](const fs::path& p) { return decode_labels(read_file(p), legend); });
  const auto [tensor, mask] = transfer::resolve_map(table, labels);
  const std::string tensor_path = o.out_prefix + ".afmt";
  const std::string mask_path = o.out_prefix + ".afmk";
  const auto tensor_bytes = encode_tensor(tensor);
  const auto mask_bytes = encode_mask(mask);
  write_file_atomic(tensor_path, tensor_bytes);
  write_file_atomic(mask_path, mask_bytes);
  out << tensor_path << "\n" << mask_path << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, spdlog::logger& log) {
  refnet::ModelConfig mc;
  mc.k = o.k;
  mc.depth = o.depth;
  mc.encoder_width = o.width;
  mc.seed = o.seed;
  refnet::TrainConfig tc;
  tc.epochs_max = o.epochs;
  tc.batch_size = o.batch;
  tc.patience = o.patience;
  tc.encoder_train = !o.freeze_encoder;
  tc.loss_mode = o.masked ? refnet::LossMode::kMasked : refnet::LossMode::kUnmasked;
  tc.seed = o.seed;
  tc.learning_rate = o.lr;
  try {
    mc.validate();
    tc.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  const auto train_set = load_all(o.train);
  const auto val_set = load_all(o.val);
  log.info("training on {} samples, validating on {}", train_set.size(), val_set.size());

  const auto result = refnet::train(mc, train_set, val_set, tc, [&](const refnet::EpochRecord& r) {
    log.info("epoch {}: train {:.6f} val {:.6f}", r.epoch, r.train_loss, r.val_loss);
  });
  const std::string history_path = o.history.empty() ? o.out + ".history.json" : o.history;
  write_file_atomic(o.out, refnet::encode_checkpoint(mc, result.best));
  write_file_atomic(history_path, refnet::encode_history(result.history));
  log.info("best epoch {} of {}", result.best_epoch, result.history.size());
  out << o.out << "\n";
  return kExitOk;
}

int cmd_threshold(const Options& o, std::ostream& out, spdlog::logger& log) {
  const auto ck = load_ckpt(o.ckpt);
  const auto samples = load_all(o.pred);
  evalkit::ThresholdSweep sweep;
  for (const auto& s : samples) {
    ck.config.check_input(s.height(), s.width());
    sweep.add(refnet::predict(ck.params, ck.config, s.image), s.target, s.mask);
  }
  const auto thresholds = sweep.result();
  write_file_atomic(o.out, evalkit::encode_thresholds(thresholds));
  log.info("calibrated thresholds on {} images", samples.size());
  out << o.out << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out, spdlog::logger& log) {
  evalkit::MetricsMode mode;
  try {
    mode = evalkit::parse_mode(o.mode);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto ck = load_ckpt(o.ckpt);
  const auto thresholds = o.thresholds.empty()
                              ? evalkit::ThresholdSet{}
                              : from_file(o.thresholds, [](const fs::path& p) {
                                  return evalkit::decode_thresholds(read_text_file(p));
                                });
  const auto manifest = load_manifest(o.data);
  const auto samples = from_file(o.data, [&](const fs::path&) { return mapgen::load_samples(manifest); });

  const fs::path report_path = o.out;
  const fs::path report_dir = report_path.parent_path();
  const fs::path pred_dir = o.pred_out.empty() ? fs::path(o.out + ".predictions") : fs::path(o.pred_out);
  fs::create_directories(pred_dir);

  evalkit::MetricsAccumulator acc;
  nlohmann::ordered_json listed = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    ck.config.check_input(s.height(), s.width());
    const auto prediction = refnet::predict(ck.params, ck.config, s.image);
    acc.add(evalkit::binarize_ground_truth(s.target), evalkit::binarize(prediction, thresholds), s.mask);
    std::string stem = std::to_string(i);
    stem.insert(0, stem.size() < 5 ? 5 - stem.size() : 0, '0');
    const fs::path pred_path = pred_dir / ("pred_" + stem + ".afmt");
    write_file_atomic(pred_path, encode_tensor(prediction));
    listed.push_back({{"source_id", s.source_id},
                      {"image", relative_to(manifest.base_dir / manifest.entries[i].image, report_dir)},
                      {"prediction", relative_to(pred_path, report_dir)}});
  }
  const auto report = acc.report(mode);
  auto j = evalkit::report_to_json(report);
  j["thresholds"] = thresholds.values();
  j["samples"] = std::move(listed);
  write_file_atomic(report_path, j.dump(2) + "\n");
  log.info("evaluated {} images", samples.size());
  out << evalkit::format_report_table(report);
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, spdlog::logger& log) {
  std::array<std::size_t, 3> channels{};
  {
    std::stringstream ss(o.channels);
    std::string item;
    std::size_t n = 0;
    while (std::getline(ss, item, ',')) {
      if (n == 3) throw UsageError("--channels takes exactly three affordances");
      channels[n++] = channel_index(item);
    }
    if (n != 3) throw UsageError("--channels takes exactly three affordances");
  }
  const fs::path eval_path = o.eval;
  const auto j = from_file(eval_path, [](const fs::path& p) {
    try {
      return nlohmann::json::parse(read_text_file(p));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(e.what(), e.byte);
    }
  });
  evalkit::MetricsReport report;
  try {
    report = evalkit::report_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw FileError(eval_path, FormatError(e.what(), 0));
  }
  const fs::path base = eval_path.parent_path();
  const fs::path overlay_dir = o.overlay_out;
  fs::create_directories(overlay_dir);
  std::size_t written = 0;
  if (j.contains("samples")) {
    for (const auto& s : j.at("samples")) {
      const fs::path image_path = base / s.at("image").get<std::string>();
      const fs::path pred_path = base / s.at("prediction").get<std::string>();
      const auto image = from_file(image_path, [](const fs::path& p) { return load_png(p); });
      const auto prediction = from_file(pred_path, [](const fs::path& p) { return load_tensor(p); });
      if (image.height() != prediction.height() || image.width() != prediction.width()) {
        throw FileError(pred_path, ValidationError("prediction size does not match its image"));
      }
      std::string stem = std::to_string(written);
      stem.insert(0, stem.size() < 5 ? 5 - stem.size() : 0, '0');
      write_file_atomic(overlay_dir / ("overlay_" + stem + ".png"),
                        encode_png(render_overlay(image, prediction, channels)));
      ++written;
    }
  }
  log.info("wrote {} overlays to {}", written, overlay_dir.string());
  out << evalkit::format_report_table(report);
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON file whose keys mirror these flags; flags given here win");
}

}  // namespace

RgbRaster render_overlay(const RgbRaster& image, const AffordanceTensor& prediction,
                         const std::array<std::size_t, 3>& channels) {
  if (image.height() != prediction.height() || image.width() != prediction.width()) {
    throw ArgumentError("overlay: image and prediction sizes differ");
  }
  RgbRaster out(image.height(), image.width());
  for (std::size_t c = 0; c < 3; ++c) {
    const auto p = prediction.channel(channels[c]);
    for (std::size_t r = 0; r < image.height(); ++r) {
      for (std::size_t x = 0; x < image.width(); ++x) {
        out.at(c, r, x) = std::clamp(0.35 * image.at(c, r, x) + p[r * image.width() + x], 0.0, 1.0);
      }
    }
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Affordance map toolkit", "afford"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Render a simulated dataset");
  add_common(sim, o);
  sim->add_option("--count", o.count, "Number of samples")->required();
  sim->add_option("--seed", o.seed, "Dataset seed")->required();
  sim->add_option("--size", o.size, "Image size WxH")->capture_default_str();
  sim->add_option("--room-mix", o.room_mix, "Fraction of kitchens")->capture_default_str();
  sim->add_option("--table", o.table, "Transfer table TSV")->required();
  sim->add_option("--out", o.out, "Output directory")->required();

  auto* maps = app.add_subcommand("maps", "Turn a part-label map into affordance maps");
  add_common(maps, o);
  maps->add_option("--labels", o.labels, "PLBL part-label file")->required();
  maps->add_option("--legend", o.legend, "Legend JSON")->required();
  maps->add_option("--table", o.table, "Transfer table TSV")->required();
  maps->add_option("--out-prefix", o.out_prefix, "Writes PREFIX.afmt and PREFIX.afmk")->required();

  auto* train = app.add_subcommand("train", "Train the refinement network");
  add_common(train, o);
  train->add_option("--train", o.train, "Training manifest")->required();
  train->add_option("--val", o.val, "Validation manifest")->required();
  train->add_option("--k", o.k, "Refinement width factor")->capture_default_str();
  train->add_option("--depth", o.depth, "Encoder stages")->capture_default_str();
  train->add_option("--width", o.width, "First encoder stage channels")->capture_default_str();
  train->add_option("--masked", o.masked, "Masked loss (true/false)")->capture_default_str();
  train->add_option("--freeze-encoder", o.freeze_encoder, "Keep encoder weights fixed (true/false)")
      ->capture_default_str();
  train->add_option("--epochs", o.epochs, "Maximum epochs")->capture_default_str();
  train->add_option("--batch", o.batch, "Batch size")->capture_default_str();
  train->add_option("--patience", o.patience, "Early-stopping patience")->capture_default_str();
  train->add_option("--lr", o.lr, "RMSprop learning rate")->capture_default_str();
  train->add_option("--seed", o.seed, "Initialization and shuffle seed")->capture_default_str();
  train->add_option("--out", o.out, "Checkpoint path")->required();
  train->add_option("--history", o.history, "History JSON path (default OUT.history.json)");

  auto* thr = app.add_subcommand("threshold", "Calibrate per-affordance thresholds");
  add_common(thr, o);
  thr->add_option("--pred", o.pred, "Manifest to calibrate on")->required();
  thr->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  thr->add_option("--out", o.out, "Threshold JSON path")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, o);
  ev->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  ev->add_option("--data", o.data, "Manifest to evaluate")->required();
  ev->add_option("--thresholds", o.thresholds, "Threshold JSON (default 0.5 everywhere)");
  ev->add_option("--mode", o.mode, "Accuracy convention: standard or paper")->capture_default_str();
  ev->add_option("--out", o.out, "Report JSON path")->required();
  ev->add_option("--pred-out", o.pred_out, "Directory for predictions (default OUT.predictions)");

  auto* rep = app.add_subcommand("report", "Print a report and render overlays");
  add_common(rep, o);
  rep->add_option("--eval", o.eval, "Report JSON from eval")->required();
  rep->add_option("--overlay-out", o.overlay_out, "Directory for overlay PNGs")->required();
  rep->add_option("--channels", o.channels, "Affordances drawn as red,green,blue")->capture_default_str();

  std::shared_ptr<spdlog::logger> log;
  try {
    auto expanded = expand_config(args);
    std::reverse(expanded.begin(), expanded.end());
    app.parse(expanded);
    log = make_logger(err);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    const auto parsed = app.get_subcommands();
    err << "error: " << e.what() << "\n" << (parsed.empty() ? app.help() : parsed.front()->help());
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o, out, *log);
    if (maps->parsed()) return cmd_maps(o, out, *log);
    if (train->parsed()) return cmd_train(o, out, *log);
    if (thr->parsed()) return cmd_threshold(o, out, *log);
    if (ev->parsed()) return cmd_eval(o, out, *log);
    if (rep->parsed()) return cmd_report(o, out, *log);
  } catch (const UsageError& e) {
    const CLI::App* sub = app.get_subcommands().front();
    err << "error: " << e.what() << "\n" << sub->help();
    return kExitUsage;
  } catch (const Error& e) {
    err << json_error_line(e.kind(), e.what()) << "\n";
    return kExitFailure;
  } catch (const fs::filesystem_error& e) {
    err << json_error_line("io", e.what()) << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << json_error_line("internal", e.what()) << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace afford::cli
