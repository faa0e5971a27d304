#include "uapforge/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "uapforge/dataset.hpp"
#include "uapforge/errors.hpp"
#include "uapforge/evaluation.hpp"
#include "uapforge/model_adapter.hpp"
#include "uapforge/optimizer.hpp"
#include "uapforge/persistence.hpp"
#include "uapforge/text_attack.hpp"

namespace uapforge::cli {

namespace fs = std::filesystem;

namespace {

fs::path under(const fs::path& workdir, const fs::path& p) { return p.is_absolute() ? p : workdir / p; }

std::uint64_t parse_seed(const std::string& s, const char* origin) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError(std::string(origin) + " must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

Geometry parse_size(const std::string& s) {
  Geometry g;
  char x1 = 0, x2 = 0;
  std::istringstream is(s);
  if (!(is >> g.height >> x1 >> g.width >> x2 >> g.channels) || x1 != 'x' || x2 != 'x' || !g.valid()) {
    throw ConfigError("size must look like HxWxC, got '" + s + "'");
  }
  return g;
}

void write_snapshot(const RunConfig& cfg, const fs::path& artifact) {
  const fs::path dir = artifact.has_parent_path() ? artifact.parent_path() : fs::path(".");
  write_text_file(dir / kSnapshotName, to_toml(cfg));
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

struct Loaded {
  PairedDataset dataset;
  std::unique_ptr<EncoderBundle> bundle;
};

Loaded load_inputs(const RunConfig& cfg, const fs::path& workdir) {
  PairedDataset ds = load_manifest(under(workdir, cfg.manifest));
  auto bundle = make_adapter(cfg.adapter, ds.geometry());
  return {std::move(ds), std::move(bundle)};
}

int attack_image(const Invocation& inv, std::ostream& out) {
  const RunConfig cfg = resolve_config(inv, true);
  Loaded in = load_inputs(cfg, inv.workdir);
  const fs::path uap_path = under(inv.workdir, inv.out.value_or("uap.bin"));
  const fs::path trace_path =
      inv.trace ? under(inv.workdir, *inv.trace) : uap_path.parent_path() / "trace.csv";
  ensure_parent(uap_path);
  ensure_parent(trace_path);

  const AttackResult result = run_image_attack(in.dataset, *in.bundle, cfg.attack);
  save_uap(result.uap, uap_path);
  save_trace(result.trace, trace_path);
  write_snapshot(cfg, uap_path);
  out << "attack-image: " << result.trace.size() << " steps, |delta|_inf = " << result.uap.linf()
      << " (budget " << result.uap.epsilon << ")\n"
      << "wrote " << uap_path.string() << " and " << trace_path.string() << "\n";
  return 0;
}

int attack_text(const Invocation& inv, std::ostream& out) {
  const RunConfig cfg = resolve_config(inv, true);
  Loaded in = load_inputs(cfg, inv.workdir);
  const fs::path path = under(inv.workdir, inv.out.value_or("triggers.json"));
  ensure_parent(path);

  TriggerArtifact artifact;
  artifact.lexicon = mine_triggers(in.dataset, *in.bundle, cfg.text);
  if (artifact.lexicon.ranked.empty()) throw Error("no trigger candidates found in the corpus");
  artifact.trigger = {artifact.lexicon.ranked.front().token, cfg.attack.epsilon_text, cfg.policy};
  save_triggers(artifact, path);
  write_snapshot(cfg, path);
  out << "attack-text: " << artifact.lexicon.ranked.size() << " candidates, trigger '" << artifact.trigger.token
      << "' (" << to_string(cfg.policy) << ", budget " << cfg.attack.epsilon_text << ")\n"
      << "wrote " << path.string() << "\n";
  return 0;
}

int evaluate(const Invocation& inv, std::ostream& out) {
  const RunConfig cfg = resolve_config(inv, true);
  Loaded in = load_inputs(cfg, inv.workdir);
  const fs::path path = under(inv.workdir, inv.report.value_or("report.json"));
  ensure_parent(path);

  std::optional<ImageUAP> uap;
  std::optional<TriggerArtifact> triggers;
  if (inv.uap) uap = load_uap(under(inv.workdir, *inv.uap));
  if (inv.triggers) triggers = load_triggers(under(inv.workdir, *inv.triggers));

  AttackSpec spec;
  spec.uap = uap ? &*uap : nullptr;
  spec.trigger = triggers ? &triggers->trigger : nullptr;
  spec.seed = cfg.seed;
  spec.divergence = cfg.attack.loss.divergence;
  AttackReport report = evaluate_attack(*in.bundle, in.dataset, spec, cfg.eval.ks);
  report.config_digest = config_digest(cfg);
  save_report(report, path);
  write_snapshot(cfg, path);
  out << render_report(report) << "wrote " << path.string() << "\n";
  return 0;
}

int report(const Invocation& inv, std::ostream& out) {
  const AttackReport r = load_report(under(inv.workdir, inv.report.value_or("report.json")));
  out << render_report(r);
  return 0;
}

int synth(const Invocation& inv, std::ostream& out) {
  const std::uint64_t seed = inv.seed.value_or(0);
  const fs::path dir = under(inv.workdir, inv.out.value_or("data"));
  const PairedDataset ds =
      synth_toy_dataset(seed, inv.synth_n, parse_size(inv.synth_size), inv.synth_vocab, inv.synth_caption_len);
  const fs::path manifest = write_manifest(ds, dir);
  out << "synth-dataset: " << ds.n() << " images, " << ds.n_t() << " captions\nwrote " << manifest.string() << "\n";
  return 0;
}

}  // namespace

RunConfig resolve_config(const Invocation& inv, bool require_inputs) {
  RunConfig cfg = inv.config ? parse_run_config(read_text_file(under(inv.workdir, *inv.config))) : RunConfig{};
  if (const char* env = std::getenv(kSeedEnv); env && *env) cfg.seed = parse_seed(env, kSeedEnv);
  if (inv.seed) cfg.seed = *inv.seed;
  if (inv.manifest) cfg.manifest = *inv.manifest;
  if (inv.adapter) cfg.adapter = *inv.adapter;
  if (inv.ks) cfg.eval.ks = *inv.ks;
  cfg.sync();
  cfg.validate(require_inputs);
  return cfg;
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    if (inv.subcommand == "attack-image") return attack_image(inv, out);
    if (inv.subcommand == "attack-text") return attack_text(inv, out);
    if (inv.subcommand == "evaluate") return evaluate(inv, out);
    if (inv.subcommand == "report") return report(inv, out);
    if (inv.subcommand == "synth-dataset") return synth(inv, out);
    err << "error: unknown subcommand '" << inv.subcommand << "'\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uapforge::cli
