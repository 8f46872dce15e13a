#include "tspkit/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tspkit/dataset_io.hpp"
#include "tspkit/drd_check.hpp"
#include "tspkit/metrics.hpp"
#include "tspkit/parallel.hpp"
#include "tspkit/serialize.hpp"
#include "tspkit/stats.hpp"
#include "tspkit/synthetic.hpp"
#include "tspkit/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace tspkit::cli {

namespace {

// Thrown for bad inputs discovered after argument parsing.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
  if (!f) throw InputError("failed writing " + path.string());
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::size_t resolve_threads(std::size_t requested) {
  return requested == 0 ? default_thread_count() : requested;
}

// Explicit path, else registry.txt in dir or up to two parents, else default.
ClassRegistry resolve_registry(const std::string& explicit_path, const fs::path& near) {
  if (!explicit_path.empty()) return ClassRegistry::load(explicit_path);
  fs::path dir = near;
  for (int i = 0; i < 3 && !dir.empty(); ++i) {
    if (fs::exists(dir / "registry.txt")) return ClassRegistry::load(dir / "registry.txt");
    const fs::path parent = dir.parent_path();
    if (parent == dir) break;
    dir = parent;
  }
  return ClassRegistry::default_registry();
}

constexpr const char* kThreadsEnv = "TSPKIT_THREADS";

// CLI11 drops env values that fail validation without a word, so the
// variable is read by hand after parsing: flag > config file > env > default.
struct ThreadsOption {
  CLI::Option* option;
  std::size_t* value;
};

ThreadsOption add_threads_option(CLI::App* sub, std::size_t& threads) {
  CLI::Option* opt =
      sub->add_option("--threads", threads,
                      "Worker threads (0 = available parallelism) [env: TSPKIT_THREADS]")
          ->check(CLI::NonNegativeNumber);
  return {opt, &threads};
}

// False when the variable is set but not a non-negative integer.
bool apply_threads_env(const ThreadsOption& t, std::ostream& err) {
  if (t.option->count() > 0) return true;
  const char* raw = std::getenv(kThreadsEnv);
  if (raw == nullptr || *raw == '\0') return true;
  const std::string text(raw);
  if (text.find_first_not_of("0123456789") != std::string::npos || text.size() > 6) {
    err << "error: " << kThreadsEnv << "='" << text << "' is not a non-negative integer\n";
    return false;
  }
  *t.value = static_cast<std::size_t>(std::stoul(text));
  return true;
}

// ---- eval-semantic ---------------------------------------------------------

struct EvalArgs {
  std::string gt_dir, pred_dir, registry, out;
  std::size_t threads = 0;
};

fs::path prediction_path(const fs::path& pred_dir, const std::string& id) {
  if (fs::is_directory(pred_dir / "labels")) return pred_dir / "labels" / (id + ".png");
  return pred_dir / (id + ".png");
}

int cmd_eval_semantic(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path gt_dir(a.gt_dir), pred_dir(a.pred_dir);
  const ClassRegistry registry = resolve_registry(a.registry, gt_dir);
  if (!fs::is_directory(gt_dir / "labels")) {
    err << "error: " << (gt_dir / "labels").string() << " is not a directory\n";
    return kExitInputError;
  }
  if (!fs::is_directory(pred_dir)) {
    err << "error: " << pred_dir.string() << " is not a directory\n";
    return kExitInputError;
  }
  const std::vector<std::string> ids = list_png_ids(gt_dir / "labels");
  if (ids.empty()) {
    err << "error: no ground-truth label maps in " << (gt_dir / "labels").string() << '\n';
    return kExitInputError;
  }

  struct ImageResult {
    std::optional<metrics::ConfusionMatrix> cm;
    std::optional<metrics::WeightedTallies> tallies;
    metrics::InstanceSizeAccumulator sizes;
    std::string error;
  };
  const auto results = parallel_map(ids.size(), resolve_threads(a.threads), [&](std::size_t i) {
    ImageResult r;
    const std::string& id = ids[i];
    try {
      const fs::path pred_path = prediction_path(pred_dir, id);
      if (!fs::exists(pred_path)) throw InputError(pred_path.string() + ": missing prediction");
      const LabelMap gt = load_label_map(gt_dir / "labels" / (id + ".png"), registry.size());
      const InstanceMap inst = load_instance_map(gt_dir / "instances" / (id + ".png"));
      const LabelMap pred = load_label_map(pred_path, registry.size());
      const PairReport pair = validate_pair(gt, inst, registry);
      if (!pair.empty()) {
        const PairIssue& first = pair.issues.front();
        throw InputError(id + ": " + std::to_string(pair.total_issues) +
                         " label/instance inconsistencies, first " + to_string(first.kind) +
                         " at (x=" + std::to_string(first.x) + ", y=" + std::to_string(first.y) +
                         ")");
      }
      if (pred.width != gt.width || pred.height != gt.height) {
        throw InputError(id + ": prediction is " + std::to_string(pred.width) + "x" +
                         std::to_string(pred.height) + ", ground truth is " +
                         std::to_string(gt.width) + "x" + std::to_string(gt.height));
      }
      metrics::ConfusionMatrix cm(registry.size());
      cm.accumulate(gt, pred);
      metrics::WeightedTallies tallies(registry);
      tallies.accumulate(gt, inst, pred);
      r.sizes.add(inst, registry);
      r.cm = std::move(cm);
      r.tallies = std::move(tallies);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  });

  metrics::ConfusionMatrix cm(registry.size());
  metrics::WeightedTallies tallies(registry);
  metrics::InstanceSizeAccumulator sizes;
  std::size_t failures = 0;
  for (const ImageResult& r : results) {
    if (!r.error.empty()) {
      err << "error: " << r.error << '\n';
      ++failures;
      continue;
    }
    cm.merge(*r.cm);
    tallies.merge(*r.tallies);
    sizes.merge(r.sizes);
  }
  if (failures) {
    err << failures << " of " << ids.size() << " images could not be evaluated\n";
    return kExitInputError;
  }

  metrics::IouResult iou;
  try {
    iou = metrics::miou(cm);
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  const metrics::IiouResult inst_iou = metrics::iiou(tallies, sizes.means());

  json report;
  json per_class = json::object(), per_class_i = json::object(), pixels = json::object();
  out << std::left << std::setw(22) << "class" << std::right << std::setw(10) << "IoU"
      << std::setw(10) << "iIoU" << '\n';
  for (const ClassInfo& c : registry.classes()) {
    const auto& v = iou.per_class[c.id];
    per_class[c.name] = v ? json(*v) : json(nullptr);
    std::string iiou_cell = "-";
    if (c.has_instances) {
      auto it = inst_iou.per_class.find(c.id);
      per_class_i[c.name] = it == inst_iou.per_class.end() ? json(nullptr) : json(it->second);
      if (it != inst_iou.per_class.end()) iiou_cell = fmt(it->second, 6);
    }
    std::uint64_t gt_pixels = 0;
    for (std::size_t p = 0; p < registry.size(); ++p) gt_pixels += cm.at(c.id, p);
    pixels[c.name] = gt_pixels;
    out << std::left << std::setw(22) << c.name << std::right << std::setw(10)
        << (v ? fmt(*v, 6) : std::string("-")) << std::setw(10) << iiou_cell << '\n';
  }
  report["num_images"] = ids.size();
  report["per_class_iou"] = per_class;
  report["miou"] = iou.mean;
  report["per_class_iiou"] = per_class_i;
  report["iiou"] = inst_iou.mean ? json(*inst_iou.mean) : json(nullptr);
  report["pixel_counts"] = pixels;
  out << "mIoU " << fmt(iou.mean, 6) << '\n';
  out << "iIoU " << (inst_iou.mean ? fmt(*inst_iou.mean, 6) : std::string("-")) << '\n';
  if (!a.out.empty()) write_text(a.out, report.dump(2) + "\n");
  return kExitOk;
}

// ---- stats -----------------------------------------------------------------

struct StatsArgs {
  std::string data_root, registry, out;
  std::vector<std::string> splits{"train"};
  std::size_t threads = 0;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path root(a.data_root);
  if (!fs::is_directory(root)) {
    err << "error: " << root.string() << " is not a directory\n";
    return kExitInputError;
  }
  const ClassRegistry registry =
      a.registry.empty() ? load_dataset_registry(root) : ClassRegistry::load(a.registry);
  std::vector<InstanceMap> maps;
  std::vector<std::string> errors;
  std::string name;
  for (const std::string& s : a.splits) {
    const Split split = parse_split(s);
    SplitLoadResult loaded = load_split(root, split, registry);
    for (auto& e : loaded.errors) errors.push_back(std::move(e));
    for (auto& img : loaded.images) maps.push_back(std::move(img.instances));
    name += (name.empty() ? "" : "+") + s;
  }
  for (const std::string& e : errors) err << "error: " << e << '\n';
  if (!errors.empty()) return kExitInputError;
  if (maps.empty()) {
    err << "error: split " << name << " under " << root.string() << " has no images\n";
    return kExitInputError;
  }
  const stats::DatasetReport report = stats::dataset_report(maps, registry,
                                                            resolve_threads(a.threads));
  out << stats::render_table(report, name);
  if (!a.out.empty()) write_text(a.out, stats::to_json(report, registry).dump(2) + "\n");
  return kExitOk;
}

// ---- crowd-rate ------------------------------------------------------------

struct CrowdArgs {
  std::string label_dir, registry, out_prefix;
  std::size_t threads = 0;
};

int cmd_crowd_rate(const CrowdArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path dir(a.label_dir);
  const ClassRegistry registry = resolve_registry(a.registry, dir);
  if (!registry.road_class()) {
    err << "error: registry marks no road class\n";
    return kExitInputError;
  }
  const stats::CrowdRateSeries series =
      stats::crowd_rate_series_from_dir(dir, registry, resolve_threads(a.threads));
  for (const std::string& p : series.problems) err << "warning: " << p << '\n';
  if (series.entries.empty()) {
    err << "error: no readable label maps in " << dir.string() << '\n';
    return kExitInputError;
  }
  write_text(a.out_prefix + ".csv", stats::to_csv(series));
  write_text(a.out_prefix + ".svg", stats::to_svg(series));
  std::size_t undefined = 0;
  for (const auto& e : series.entries) undefined += e.value.defined ? 0 : 1;
  out << "images " << series.entries.size() << '\n';
  out << "crowd rate min " << fmt(series.min_rate(), 6) << " mean " << fmt(series.mean_rate(), 6)
      << " max " << fmt(series.max_rate(), 6) << '\n';
  if (undefined) out << undefined << " images have neither road nor participant pixels\n";
  return kExitOk;
}

// ---- shared DRD configuration ---------------------------------------------

struct ModelArgs {
  std::string preset;
  std::optional<std::size_t> tokens, heads, channels, classes;
  std::string token_mode = "region";
  bool literal_scaling = false;
};

void add_model_options(CLI::App* sub, ModelArgs& m) {
  sub->add_option("--preset", m.preset, "Token/head preset: setting1..setting4");
  sub->add_option("--tokens", m.tokens, "Number of region tokens N")->check(CLI::PositiveNumber);
  sub->add_option("--heads", m.heads, "Attention heads h")->check(CLI::PositiveNumber);
  sub->add_option("--channels", m.channels, "Decoder channels C")->check(CLI::PositiveNumber);
  sub->add_option("--token-mode", m.token_mode, "region or class")
      ->check(CLI::IsMember({"region", "class"}));
  sub->add_flag("--literal-sqrt-c", m.literal_scaling,
                "Scale token attention by 1/sqrt(C) instead of 1/sqrt(C/h)");
}

drd::DrdConfig build_config(const ModelArgs& m, std::size_t num_classes) {
  drd::DrdConfig c = m.preset.empty() ? drd::DrdConfig{} : drd::preset(m.preset, num_classes);
  c.num_classes = m.classes.value_or(num_classes);
  if (m.tokens) c.num_tokens = *m.tokens;
  if (m.heads) c.num_heads = *m.heads;
  if (m.channels) c.channels = *m.channels;
  c.token_mode = drd::parse_token_mode(m.token_mode);
  if (c.token_mode == drd::TokenMode::kClass) c.num_tokens = c.num_classes;
  c.literal_sqrt_c_scaling = m.literal_scaling;
  c.validate();
  return c;
}

json config_json(const drd::DrdConfig& c) {
  json j;
  j["num_tokens"] = c.num_tokens;
  j["num_heads"] = c.num_heads;
  j["channels"] = c.channels;
  j["num_classes"] = c.num_classes;
  j["aspp_dilations"] = c.aspp_dilations;
  j["token_mode"] = drd::to_string(c.token_mode);
  j["literal_sqrt_c_scaling"] = c.literal_sqrt_c_scaling;
  return j;
}

// ---- drd-demo --------------------------------------------------------------

struct DemoArgs {
  ModelArgs model = [] {
    ModelArgs m;
    m.preset = "setting2";
    return m;
  }();
  std::uint64_t seed = 0;
  std::size_t steps = 500;
  double lr = 0.05;
  double clip_norm = 1.0;
  double final_proj_gain = 32.0;
  std::size_t images = 8;
  std::size_t size = 64;
  std::size_t probes = 4;
  std::string out_dir;
};

int cmd_drd_demo(const DemoArgs& a, std::ostream& out, std::ostream& err) {
  const ClassRegistry registry = ClassRegistry::toy_registry();
  drd::DrdConfig config;
  try {
    config = build_config(a.model, registry.size());
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  if (a.size == 0 || a.size % 16 != 0) {
    err << "error: --size must be a positive multiple of 16\n";
    return kExitInputError;
  }
  SyntheticOptions gen;
  gen.seed = a.seed;
  gen.count = a.images;
  gen.width = gen.height = a.size;
  const SyntheticSet set = generate_synthetic(registry, gen);

  drd::TrainOptions opts;
  opts.steps = a.steps;
  opts.lr = a.lr;
  opts.seed = a.seed;
  opts.clip_norm = a.clip_norm;
  opts.final_proj_gain = a.final_proj_gain;
  drd::TrainResult trained;
  try {
    trained = drd::train_toy(set.images, config, opts);
  } catch (const drd::TrainingDiverged& e) {
    err << "error: training diverged at step " << e.step() << ": " << e.what() << '\n';
    return kExitNumericError;
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_text(dir / "loss.csv", drd::loss_csv(trained.losses));
  save_tensors(dir / "weights.tspk", trained.params.named_parameters());

  const Tensor input = drd::images_to_tensor(set.images);
  const std::vector<std::uint8_t> target = drd::downsample_labels(set.images, 8);
  const drd::DrdOutput final_out = drd::drd_forward(input, trained.params, config);
  const double accuracy = drd::pixel_accuracy(final_out.logits, target);
  const double final_loss = drd::cross_entropy_loss(final_out.logits, target).item();
  drd::export_attention_maps(final_out.refine.front().A, final_out.feature_h,
                             final_out.feature_w, dir / "attention");

  GradCheckOptions check;
  check.max_probes_per_input = a.probes;
  check.seed = a.seed;
  double grad_error = 0.0;
  bool grad_ok = true;
  for (const auto& stage : drd::check_drd_gradients(config, a.seed, 32, check)) {
    grad_error = std::max(grad_error, stage.report.max_rel_error);
    grad_ok = grad_ok && stage.report.passed;
  }

  json summary;
  summary["config"] = config_json(config);
  summary["seed"] = a.seed;
  summary["steps"] = a.steps;
  summary["lr"] = a.lr;
  summary["clip_norm"] = a.clip_norm;
  summary["final_proj_gain"] = a.final_proj_gain;
  summary["images"] = a.images;
  summary["initial_loss"] = trained.losses.empty() ? json(nullptr) : json(trained.losses.front());
  summary["final_loss"] = final_loss;
  summary["pixel_accuracy"] = accuracy;
  summary["grad_check_max_rel_error"] = grad_error;
  summary["grad_check_passed"] = grad_ok;
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  out << "steps " << a.steps << ", final loss " << fmt(final_loss, 6) << '\n';
  out << "pixel accuracy " << fmt(accuracy, 4) << '\n';
  out << "grad check max relative error " << std::scientific << std::setprecision(3)
      << grad_error << std::defaultfloat << (grad_ok ? " (pass)" : " (FAIL)") << '\n';
  out << "wrote " << dir.string() << '\n';
  return kExitOk;
}

// ---- grad-check ------------------------------------------------------------

struct GradArgs {
  ModelArgs model;
  std::size_t classes = 21;
  std::uint64_t seed = 0;
  std::size_t size = 32;
  double tolerance = 1e-4;
  std::size_t probes = 6;
  bool corrupt = false;
};

int cmd_grad_check(const GradArgs& a, std::ostream& out, std::ostream& err) {
  drd::DrdConfig config;
  try {
    config = build_config(a.model, a.classes);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  if (a.size == 0 || a.size % 16 != 0) {
    err << "error: --size must be a positive multiple of 16\n";
    return kExitInputError;
  }
  GradCheckOptions opts;
  opts.tolerance = a.tolerance;
  opts.max_probes_per_input = a.probes;
  opts.seed = a.seed;
  if (a.corrupt) {
    opts.corrupt_analytic = [](std::vector<std::vector<double>>& grads) {
      for (auto& g : grads) {
        for (double& v : g) v = v * 1.5 + 1e-2;
      }
    };
  }
  bool ok = true;
  for (const auto& stage : drd::check_drd_gradients(config, a.seed, a.size, opts)) {
    ok = ok && stage.report.passed;
    out << std::left << std::setw(14) << stage.stage << " max relative error " << std::scientific
        << std::setprecision(3) << stage.report.max_rel_error << std::defaultfloat
        << (stage.report.passed ? "  pass" : "  FAIL") << '\n';
  }
  out << (ok ? "all gradients within " : "gradient check failed at tolerance ") << a.tolerance
      << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string out_root, registry;
  bool toy = false;
  SyntheticOptions options;
  std::string split = "train";
};

int cmd_generate(GenerateArgs a, std::ostream& out, std::ostream&) {
  const ClassRegistry registry = !a.registry.empty() ? ClassRegistry::load(a.registry)
                                 : a.toy             ? ClassRegistry::toy_registry()
                                                     : ClassRegistry::default_registry();
  a.options.split = parse_split(a.split);
  const SyntheticSet set = generate_synthetic(registry, a.options);
  save_dataset(a.out_root, set.images, registry);
  out << "wrote " << set.images.size() << " images (" << set.ledger.size()
      << " participants) to " << split_dir(a.out_root, a.options.split).string() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detail refining decoder, segmentation metrics and dataset statistics", "tspkit"};
  app.set_config("--config", "", "TOML-style config file; one [subcommand] section per command");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval-semantic", "mIoU / iIoU of predictions vs ground truth");
  eval_cmd->add_option("--gt-dir", eval.gt_dir, "Split directory with labels/ and instances/")
      ->required();
  eval_cmd->add_option("--pred-dir", eval.pred_dir, "Predicted label maps (flat or labels/)")
      ->required();
  eval_cmd->add_option("--registry", eval.registry, "Class registry table");
  eval_cmd->add_option("--out", eval.out, "JSON report path");
  const ThreadsOption eval_threads = add_threads_option(eval_cmd, eval.threads);

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Traffic-participant statistics of a split");
  stats_cmd->add_option("--data-root", st.data_root, "Dataset root")->required();
  stats_cmd->add_option("--split", st.splits, "Split(s) to aggregate: train, val, test")
      ->delimiter(',')
      ->check(CLI::IsMember({"train", "val", "test"}));
  stats_cmd->add_option("--registry", st.registry, "Class registry table");
  stats_cmd->add_option("--out", st.out, "JSON report path");
  const ThreadsOption stats_threads = add_threads_option(stats_cmd, st.threads);

  CrowdArgs crowd;
  auto* crowd_cmd = app.add_subcommand("crowd-rate", "Per-image crowd rate series");
  crowd_cmd->add_option("--label-dir", crowd.label_dir, "Directory of label maps")->required();
  crowd_cmd->add_option("--registry", crowd.registry, "Class registry table");
  crowd_cmd->add_option("--out-prefix", crowd.out_prefix, "Writes <prefix>.csv and <prefix>.svg")
      ->required();
  const ThreadsOption crowd_threads = add_threads_option(crowd_cmd, crowd.threads);

  DemoArgs demo;
  auto* demo_cmd = app.add_subcommand("drd-demo", "Train the decoder on a synthetic toy set");
  add_model_options(demo_cmd, demo.model);
  demo_cmd->add_option("--seed", demo.seed);
  demo_cmd->add_option("--steps", demo.steps);
  demo_cmd->add_option("--lr", demo.lr)->check(CLI::NonNegativeNumber);
  demo_cmd->add_option("--clip-norm", demo.clip_norm, "Gradient-norm clip, 0 disables")
      ->check(CLI::NonNegativeNumber);
  demo_cmd->add_option("--final-proj-gain", demo.final_proj_gain)->check(CLI::PositiveNumber);
  demo_cmd->add_option("--images", demo.images)->check(CLI::PositiveNumber);
  demo_cmd->add_option("--size", demo.size, "Image side in pixels, multiple of 16");
  demo_cmd->add_option("--grad-check-probes", demo.probes)->check(CLI::PositiveNumber);
  demo_cmd->add_option("--out-dir", demo.out_dir)->required();

  GradArgs grad;
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  add_model_options(grad_cmd, grad.model);
  grad_cmd->add_option("--classes", grad.classes)->check(CLI::Range(1, 255));
  grad_cmd->add_option("--seed", grad.seed);
  grad_cmd->add_option("--size", grad.size, "Input side in pixels, multiple of 16");
  grad_cmd->add_option("--tolerance", grad.tolerance)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--probes", grad.probes, "Entries probed per tensor, 0 = all");
  grad_cmd->add_flag("--corrupt-gradient", grad.corrupt)->group("");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic annotated dataset");
  gen_cmd->add_option("--out-root", gen.out_root)->required();
  gen_cmd->add_option("--registry", gen.registry, "Class registry table");
  gen_cmd->add_flag("--toy", gen.toy, "Use the 4-class toy registry");
  gen_cmd->add_option("--split", gen.split)->check(CLI::IsMember({"train", "val", "test"}));
  gen_cmd->add_option("--seed", gen.options.seed);
  gen_cmd->add_option("--count", gen.options.count)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--width", gen.options.width)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--height", gen.options.height)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--participants", gen.options.participants_per_image);
  gen_cmd->add_option("--min-size", gen.options.min_size)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-size", gen.options.max_size)->check(CLI::PositiveNumber);

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  for (const auto& [cmd, threads] : {std::pair{eval_cmd, eval_threads},
                                     std::pair{stats_cmd, stats_threads},
                                     std::pair{crowd_cmd, crowd_threads}}) {
    if (cmd->parsed() && !apply_threads_env(threads, err)) return kExitInputError;
  }

  try {
    if (eval_cmd->parsed()) return cmd_eval_semantic(eval, out, err);
    if (stats_cmd->parsed()) return cmd_stats(st, out, err);
    if (crowd_cmd->parsed()) return cmd_crowd_rate(crowd, out, err);
    if (demo_cmd->parsed()) return cmd_drd_demo(demo, out, err);
    if (grad_cmd->parsed()) return cmd_grad_check(grad, out, err);
    if (gen_cmd->parsed()) return cmd_generate(gen, out, err);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace tspkit::cli
