#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uapforge/cli.hpp"

int main(int argc, char** argv) {
  using uapforge::cli::Invocation;
  CLI::App app{"uapforge: universal image perturbations and trigger words for dual-encoder retrieval"};
  app.require_subcommand(1);

  Invocation inv;
  std::string workdir = ".";
  app.add_option("--workdir", workdir, "Directory all relative paths resolve against");

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", inv.config, "TOML run configuration");
    sub->add_option("--manifest", inv.manifest, "JSONL dataset manifest");
    sub->add_option("--adapter", inv.adapter, "Encoder adapter, e.g. toy or external:<lib.so>");
    sub->add_option("--seed", inv.seed, "Run seed (overrides UAPFORGE_SEED and the config)");
    sub->add_option("--workdir", workdir, "Directory all relative paths resolve against");
  };

  CLI::App* image = app.add_subcommand("attack-image", "Learn a universal image perturbation");
  common(image);
  image->add_option("--out", inv.out, "Output UAP container (default uap.bin)");
  image->add_option("--trace", inv.trace, "Training trace CSV (default trace.csv next to --out)");

  CLI::App* text = app.add_subcommand("attack-text", "Mine universal trigger words");
  common(text);
  text->add_option("--out", inv.out, "Output triggers JSON (default triggers.json)");

  CLI::App* eval = app.add_subcommand("evaluate", "Retrieval recall and attack success rate");
  common(eval);
  eval->add_option("--uap", inv.uap, "UAP container to apply to images");
  eval->add_option("--triggers", inv.triggers, "Triggers JSON to apply to captions");
  eval->add_option("--k", inv.ks, "Recall cut-offs, e.g. 1,5,10")->delimiter(',');
  eval->add_option("--report", inv.report, "Output report JSON (default report.json)");

  CLI::App* report = app.add_subcommand("report", "Print the table of a saved report");
  report->add_option("--report", inv.report, "Report JSON (default report.json)");
  report->add_option("--workdir", workdir, "Directory all relative paths resolve against");

  CLI::App* synth = app.add_subcommand("synth-dataset", "Write a synthetic toy corpus as a manifest");
  synth->add_option("--out", inv.out, "Output directory (default data)");
  synth->add_option("--seed", inv.seed, "Dataset seed");
  synth->add_option("--n", inv.synth_n, "Number of images");
  synth->add_option("--size", inv.synth_size, "Image geometry HxWxC");
  synth->add_option("--vocab", inv.synth_vocab, "Vocabulary size");
  synth->add_option("--caption-len", inv.synth_caption_len, "Tokens per caption");
  synth->add_option("--workdir", workdir, "Directory all relative paths resolve against");

  CLI11_PARSE(app, argc, argv);
  inv.subcommand = app.get_subcommands().front()->get_name();
  inv.workdir = workdir;
  return uapforge::cli::run(inv, std::cout, std::cerr);
}
