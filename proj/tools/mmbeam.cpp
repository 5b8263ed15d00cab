// Batch CLI driving the multimodal beam prediction pipeline: synthetic data
// generation, contrastive pretraining, finetuning, evaluation, and the
// ablation matrix.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmbeam/cli/runconfig.hpp"
#include "mmbeam/core/checkpoint.hpp"
#include "mmbeam/core/csv.hpp"
#include "mmbeam/data/index.hpp"
#include "mmbeam/data/synthetic.hpp"
#include "mmbeam/harness/ablate.hpp"
#include "mmbeam/harness/dataset.hpp"
#include "mmbeam/harness/plots.hpp"
#include "mmbeam/harness/pretrain.hpp"
#include "mmbeam/harness/train.hpp"
#include "mmbeam/metrics/dba.hpp"

namespace fs = std::filesystem;
using namespace mmbeam;
using Scalar = float;

namespace {

struct CommonFlags {
  std::string config_path;
  long seed = 0;
  std::string run_dir, data_dir;
  bool seed_set = false, run_dir_set = false, data_dir_set = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_path, "flat key=value config file")
      ->capture_default_str();
  auto* s = sub->add_option("--seed", f.seed, "override the master seed (default 1)");
  auto* r = sub->add_option("--run-dir", f.run_dir,
                            "run output directory (default run)");
  auto* d = sub->add_option("--data-dir", f.data_dir,
                            "dataset directory (default data)");
  sub->parse_complete_callback([&f, s, r, d] {
    f.seed_set = s->count() > 0;
    f.run_dir_set = r->count() > 0;
    f.data_dir_set = d->count() > 0;
  });
}

cli::RunConfig resolve_config(const CommonFlags& f) {
  cli::RunConfig cfg;
  if (!f.config_path.empty()) cli::load_config_file(cfg, f.config_path);
  if (f.seed_set) cfg.seed = f.seed;
  if (f.run_dir_set) cfg.run_dir = f.run_dir;
  if (f.data_dir_set) cfg.data_dir = f.data_dir;
  return cfg;
}

void write_snapshot(const cli::RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "config.snapshot");
  if (!os) throw std::runtime_error("cannot write " + (dir / "config.snapshot").string());
  os << cli::snapshot(cfg);
}

struct DataBundle {
  data::GpsNormalizer norm;
  harness::LoadedDataset<Scalar> train, val, test;
};

DataBundle load_all(const cli::RunConfig& cfg) {
  auto enc_cfg = cli::to_encoder_config(cfg);
  enc_cfg.validate();
  fs::path index_path = fs::path(cfg.data_dir) / "index.csv";
  if (!fs::exists(index_path))
    throw std::runtime_error("no dataset index at " + index_path.string() +
                             "; run `mmbeam gen-data` first or point --data-dir "
                             "at a dataset");
  auto index = data::load_index(index_path, cfg.codebook_m);
  index.split_seed = static_cast<uint64_t>(cfg.seed);
  index.split_fracs = {cfg.split_train, cfg.split_val, cfg.split_test};
  auto splits = data::split(index);
  DataBundle b;
  b.norm = data::fit_gps_normalizer(splits.train.records.begin(),
                                    splits.train.records.end());
  std::pair<double, double> bs = {cfg.scene_bs_lat, cfg.scene_bs_lon};
  b.train = harness::load_dataset<Scalar>(splits.train, enc_cfg, b.norm, bs);
  b.val = harness::load_dataset<Scalar>(splits.val, enc_cfg, b.norm, bs);
  b.test = harness::load_dataset<Scalar>(splits.test, enc_cfg, b.norm, bs);
  return b;
}

nlohmann::json model_meta(const cli::RunConfig& cfg, const std::string& phase) {
  nlohmann::json j;
  j["encoder"] = enc::to_json(cli::to_encoder_config(cfg));
  j["M"] = cfg.codebook_m;
  j["gate_order"] = cfg.train_gate_order;
  j["use_gps_text"] = cfg.train_use_gps_text;
  j["modality_mask"] = cfg.train_modality_mask;
  j["seed"] = cfg.seed;
  j["phase"] = phase;
  return j;
}

void apply_pretrained(enc::Model<Scalar>& model, const cli::RunConfig& cfg) {
  fs::path p = fs::path(cfg.run_dir) / "pretrain.ckpt";
  if (!fs::exists(p))
    throw std::runtime_error(
        "not pretrained: no checkpoint at " + p.string() +
        "; run `mmbeam pretrain` first, or set train.use_pretrain = false, or "
        "check that --run-dir points at the right run");
  auto loaded = ckpt::load<Scalar>(p.string());
  ckpt::apply(model.params(), loaded, enc::Model<Scalar>::contrastive_param);
}

int cmd_gen_data(const CommonFlags& flags) {
  auto cfg = resolve_config(flags);
  auto scene = cli::to_scene_config(cfg);
  fs::path out = cfg.data_dir;
  auto result = data::generate_synthetic(scene, out);
  write_snapshot(cfg, out);

  std::map<int, int> hist;
  for (const auto& r : result.index.records) hist[r.beam_index]++;
  std::cout << "index: " << (out / "index.csv").string() << "\n";
  std::cout << "samples: " << result.index.records.size() << ", beams hit: "
            << hist.size() << "/" << scene.M << "\n";
  for (const auto& [beam, count] : hist)
    std::cout << "beam " << beam << ": " << count << "\n";
  return 0;
}

int cmd_pretrain(const CommonFlags& flags) {
  auto cfg = resolve_config(flags);
  auto bundle = load_all(cfg);
  auto enc_cfg = cli::to_encoder_config(cfg);
  enc::Model<Scalar> model(enc_cfg, cfg.codebook_m,
                           static_cast<uint64_t>(cfg.seed));
  auto pcfg = cli::to_pretrain_config(cfg);
  auto result = harness::pretrain(model, bundle.train, bundle.val, pcfg);

  fs::path run = cfg.run_dir;
  write_snapshot(cfg, run);
  CsvWriter log((run / "pretrain_log.csv").string());
  log.row({"epoch", "mean_loss", "retrieval_top1"});
  for (size_t e = 0; e < result.mean_loss.size(); ++e)
    log.row({fmt_num(static_cast<int>(e + 1)), fmt_num(result.mean_loss[e]),
             fmt_num(result.retrieval_top1[e])});
  ckpt::save(model.params(), model_meta(cfg, "pretrain").dump(),
             (run / "pretrain.ckpt").string());
  if (!result.mean_loss.empty())
    std::cout << "final InfoNCE loss " << result.mean_loss.back()
              << ", retrieval top-1 " << result.retrieval_top1.back() << "\n";
  std::cout << "checkpoint: " << (run / "pretrain.ckpt").string() << "\n";
  return 0;
}

int cmd_finetune(const CommonFlags& flags) {
  auto cfg = resolve_config(flags);
  auto bundle = load_all(cfg);
  auto enc_cfg = cli::to_encoder_config(cfg);
  enc::Model<Scalar> model(enc_cfg, cfg.codebook_m,
                           static_cast<uint64_t>(cfg.seed));
  auto tcfg = cli::to_train_config(cfg);
  if (tcfg.use_pretrain) apply_pretrained(model, cfg);

  auto dba = cli::to_dba_config(cfg);
  auto art = harness::finetune(model, bundle.train, bundle.val, bundle.test,
                               tcfg, dba);

  fs::path run = cfg.run_dir;
  write_snapshot(cfg, run);
  harness::plot_curves(art.train_loss, art.val_loss, art.val_dba, run);
  ckpt::save(model.params(), model_meta(cfg, "finetune").dump(),
             (run / "best.ckpt").string());
  {
    std::ofstream os(run / "test_report.json");
    os << metrics::report_json(art.test.report, art.test.top1, art.test.top3)
              .dump(2)
       << "\n";
  }
  std::cout << "epochs run: " << art.epochs_run << ", best epoch "
            << art.best_epoch << " (val DBA " << art.best_val_dba << ")\n";
  std::cout << "mean gate weights (image/lidar/gps): " << art.test.mean_alpha
            << "\n";
  std::cout << "DBA=" << art.test.report.score << std::endl;
  return 0;
}

int cmd_evaluate(const CommonFlags& flags) {
  auto cfg = resolve_config(flags);
  fs::path ckpt_path = fs::path(cfg.run_dir) / "best.ckpt";
  if (!fs::exists(ckpt_path))
    throw std::runtime_error(
        "no finetuned checkpoint at " + ckpt_path.string() +
        "; run `mmbeam finetune` first, or check that --run-dir points at the "
        "right run");
  auto loaded = ckpt::load<Scalar>(ckpt_path.string());
  auto meta = nlohmann::json::parse(loaded.config_json);
  auto enc_cfg = enc::encoder_config_from_json(meta.at("encoder"));
  // The checkpoint pins the model shape; the config still provides data paths
  // and metric settings.
  cfg.codebook_m = meta.at("M").get<int>();
  cfg.scene_image_h = enc_cfg.image_h;
  cfg.scene_image_w = enc_cfg.image_w;
  cfg.train_gate_order = meta.at("gate_order").get<std::string>();
  cfg.train_use_gps_text = meta.at("use_gps_text").get<bool>();
  cfg.train_modality_mask = meta.at("modality_mask").get<std::string>();

  auto bundle = load_all(cfg);
  enc::Model<Scalar> model(enc_cfg, cfg.codebook_m,
                           static_cast<uint64_t>(cfg.seed));
  ckpt::apply(model.params(), loaded, [](const std::string&) { return true; });

  auto tcfg = cli::to_train_config(cfg);
  auto dba = cli::to_dba_config(cfg);
  auto ev = harness::evaluate(model, bundle.test, tcfg, dba,
                              resolve_threads(cfg.threads));

  fs::path run = cfg.run_dir;
  write_snapshot(cfg, run);
  {
    std::ofstream os(run / "test_report.json");
    os << metrics::report_json(ev.report, ev.top1, ev.top3).dump(2) << "\n";
  }
  std::cout << "mean gate weights (image/lidar/gps): " << ev.mean_alpha << "\n";
  std::cout << "DBA=" << ev.report.score << std::endl;
  return 0;
}

int cmd_ablate(const CommonFlags& flags) {
  auto cfg = resolve_config(flags);
  auto bundle = load_all(cfg);
  auto enc_cfg = cli::to_encoder_config(cfg);
  auto base = cli::to_train_config(cfg);
  base.epochs = cfg.ablate_epochs;
  base.early_stop_patience = cfg.ablate_patience;
  auto pre = cli::to_pretrain_config(cfg);
  auto dba = cli::to_dba_config(cfg);

  auto summary = harness::ablate(enc_cfg, cfg.codebook_m, bundle.train,
                                 bundle.val, bundle.test, base, pre,
                                 cfg.ablate_seeds, dba, /*verbose=*/true);

  fs::path run = cfg.run_dir;
  write_snapshot(cfg, run);
  CsvWriter table((run / "ablation_table.csv").string());
  table.row({"variant", "seed", "dba", "top1"});
  for (const auto& row : summary.rows) {
    if (!row.error.empty()) continue;
    table.row({row.variant, fmt_num(static_cast<long>(row.seed)),
               fmt_num(row.dba), fmt_num(row.top1)});
  }
  for (const std::string& v : harness::ablation_variants()) {
    if (summary.mean_dba.count(v))
      std::cout << v << ": mean DBA " << summary.mean_dba.at(v) << " +- "
                << summary.std_dba.at(v) << "\n";
    else
      std::cout << v << ": all runs failed\n";
  }
  for (const auto& row : summary.rows)
    if (!row.error.empty())
      std::cout << "failed: " << row.variant << " seed " << row.seed << ": "
                << row.error << "\n";
  double final_dba =
      summary.mean_dba.count("full") ? summary.mean_dba.at("full") : 0.0;
  std::cout << "DBA=" << final_dba << std::endl;
  return 0;
}

int cmd_plot(const CommonFlags& flags) {
  auto cfg = resolve_config(flags);
  fs::path run = cfg.run_dir;
  auto ft = read_csv((run / "finetune_log.csv").string());
  auto db = read_csv((run / "dba_log.csv").string());
  std::vector<double> train_loss, val_loss, val_dba;
  for (size_t i = 1; i < ft.size(); ++i) {
    train_loss.push_back(parse_double(ft[i][1]));
    val_loss.push_back(parse_double(ft[i][2]));
  }
  for (size_t i = 1; i < db.size(); ++i) val_dba.push_back(parse_double(db[i][1]));
  harness::plot_curves(train_loss, val_loss, val_dba, run);
  std::cout << "plots written to " << run.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multimodal contrastive beam prediction pipeline"};
  app.require_subcommand(1);

  CommonFlags f_gen, f_pre, f_fine, f_eval, f_abl, f_plot;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic labeled dataset");
  add_common(gen, f_gen);
  auto* pre = app.add_subcommand("pretrain", "contrastive image/LiDAR pretraining");
  add_common(pre, f_pre);
  auto* fine = app.add_subcommand("finetune", "supervised finetuning with early stopping");
  add_common(fine, f_fine);
  auto* eval = app.add_subcommand("evaluate", "evaluate the finetuned checkpoint");
  add_common(eval, f_eval);
  auto* abl = app.add_subcommand("ablate", "run the 6-variant ablation matrix");
  add_common(abl, f_abl);
  auto* plot = app.add_subcommand("plot", "re-render curves from run logs");
  add_common(plot, f_plot);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(f_gen);
    if (pre->parsed()) return cmd_pretrain(f_pre);
    if (fine->parsed()) return cmd_finetune(f_fine);
    if (eval->parsed()) return cmd_evaluate(f_eval);
    if (abl->parsed()) return cmd_ablate(f_abl);
    if (plot->parsed()) return cmd_plot(f_plot);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
