// Renders a labelled synthetic dataset with subject and lesion masks.

#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lesion_triage/error.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic lesion dataset and its manifest", "lesion-triage-synth"};
  std::string out;
  lt::synth::WriteOptions o;
  std::string source = "clinician";
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--per-class", o.per_class, "Images per class")->capture_default_str();
  app.add_option("--seed", o.seed, "Seed")->capture_default_str();
  app.add_option("--size", o.scene.size, "Side length in pixels")->capture_default_str();
  app.add_flag("--clutter", o.scene.clutter, "Draw distractor motifs on the background");
  app.add_option("--source", source, "Provenance source token")->capture_default_str();
  app.add_option("--id-prefix", o.id_prefix, "Record id prefix")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  try {
    o.source = lt::parse_source(source);
    const auto ds = lt::synth::write_dataset(out, o);
    lt::save_manifest(ds, std::filesystem::path(out) / "manifest.jsonl");
    std::cout << nlohmann::json{{"records", ds.size()}, {"manifest", out + "/manifest.jsonl"}}.dump() << "\n";
  } catch (const lt::Error& e) {
    std::cerr << nlohmann::json{{"error", lt::to_string(e.kind())}, {"detail", e.detail()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
