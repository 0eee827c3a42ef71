#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "atomkernel/scenario.hpp"

namespace {

struct SubArgs {
  std::string config;
  std::string out_dir;
  int jobs = 1;
  bool assert_mode = false;
};

void add_pipeline(CLI::App& app, const std::string& name, const std::string& blurb,
                  SubArgs& args, std::string& selected) {
  CLI::App* sub = app.add_subcommand(name, blurb);
  sub->add_option("--config", args.config, "scenario config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--jobs", args.jobs, "scenarios to run concurrently")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", args.out_dir, "output directory (default: config output_dir)");
  sub->add_flag("--assert", args.assert_mode,
                "exit 3 unless every scenario meets its pass criterion");
  sub->callback([&selected, name] { selected = name; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atomic-measure recovery toolkit"};
  app.require_subcommand(1);

  SubArgs args;
  std::string selected;
  add_pipeline(app, "certify", "build and validate dual certificates on a known support",
               args, selected);
  add_pipeline(app, "recover", "synthesize data and run the recovery solver", args, selected);
  add_pipeline(app, "stability",
               "recover, then check the support-neighborhood concentration bound", args,
               selected);
  add_pipeline(app, "sweep", "expand ranged fields and run every combination", args, selected);

  CLI11_PARSE(app, argc, argv);

  const atomkernel::RunOutcome rc = atomkernel::run_config_file(
      selected, args.config, args.out_dir, args.jobs, args.assert_mode);
  if (!rc.message.empty()) std::fprintf(stderr, "%s\n", rc.message.c_str());
  return rc.exit_code;
}
