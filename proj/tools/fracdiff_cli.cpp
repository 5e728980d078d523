#include "fracdiff/config.hpp"
#include "fracdiff/io.hpp"
#include "fracdiff/runner.hpp"

#include "CLI11.hpp"

#include <unistd.h>

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#ifndef FRACDIFF_ACCEPTANCE_PATH
#define FRACDIFF_ACCEPTANCE_PATH ""
#endif

namespace {

using fracdiff::RunType;

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    int refine = 0;
};

void add_flags(CLI::App* cmd, Flags& f, bool needs_config) {
    auto* c = cmd->add_option("--config", f.config, "scenario YAML file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", f.seed, "seed override");
    cmd->add_option("--refine", f.refine, "refinement levels (halve h and dt per level)")
        ->check(CLI::Range(0, 6))
        ->capture_default_str();
}

int run(const std::string& sub, const std::set<RunType>& accepted, const Flags& f) {
    std::string text;
    try {
        text = fracdiff::io::read_text(f.config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fracdiff::kExitConfig;
    }
    fracdiff::RunOptions opt;
    opt.out_dir = f.out;
    opt.seed = f.seed;
    opt.refine = f.refine;
    opt.config_label = f.config;

    const fracdiff::ParseResult pr = fracdiff::parse_config(text);
    if (!pr.ok()) {
        for (const auto& d : pr.diagnostics)
            std::cerr << f.config << ":" << d.line << ":" << d.column << ": " << d.message << "\n";
        fracdiff::run_config_text(text, opt);
        return fracdiff::kExitConfig;
    }
    if (!accepted.count(pr.config->run.type)) {
        std::cerr << f.config << ": run type '" << fracdiff::to_string(pr.config->run.type)
                  << "' does not belong to subcommand '" << sub << "'\n";
        return fracdiff::kExitConfig;
    }
    const fracdiff::RunOutcome r = fracdiff::run_config_text(text, opt);
    const auto& m = r.manifest;
    std::cout << m.value("scenario", std::string()) << ": " << m.value("status", std::string()) << " (exit "
              << r.exit_code << ", " << f.out << "/manifest.json)\n";
    if (m.contains("error") && !m["error"].is_null())
        std::cerr << "error [" << m["error"].value("kind", std::string()) << "]: "
                  << m["error"].value("message", std::string()) << "\n";
    return r.exit_code;
}

int accept(const Flags& f) {
    std::string exe = FRACDIFF_ACCEPTANCE_PATH;
    if (const char* env = std::getenv("FRACDIFF_ACCEPTANCE")) exe = env;
    if (exe.empty()) {
        std::cerr << "error: acceptance binary unknown; set FRACDIFF_ACCEPTANCE\n";
        return fracdiff::kExitInternal;
    }
    std::vector<std::string> args{exe, "--out", f.out};
    if (f.seed) args.insert(args.end(), {"--seed", std::to_string(*f.seed)});
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    execv(exe.c_str(), argv.data());
    std::perror(("error: cannot execute " + exe).c_str());
    return fracdiff::kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fracdiff: time-fractional nonlocal diffusion scenarios"};
    app.set_version_flag("--version", fracdiff::fracdiff_version());
    app.require_subcommand(1);

    const std::vector<std::tuple<std::string, std::string, std::set<RunType>>> commands{
        {"solve", "forward solve (homogeneous or inhomogeneous)",
         {RunType::ForwardHomogeneous, RunType::ForwardInhomogeneous}},
        {"duhamel", "Duhamel representation check", {RunType::DuhamelCheck}},
        {"invert", "inverse source reconstruction", {RunType::Inverse}},
        {"harnack", "Harnack ratio on a box pair", {RunType::Harnack}},
        {"principles", "weak and strong maximum principle checks", {RunType::Principles}},
        {"validate-kernel", "kernel class validation", {RunType::ValidateKernel}},
        {"eig", "eigenpairs and operator export", {RunType::Eig}},
        {"inequalities", "randomized auxiliary inequality sweep", {RunType::Inequalities}},
    };
    std::map<std::string, Flags> flags;
    for (const auto& [name, help, types] : commands) add_flags(app.add_subcommand(name, help), flags[name], true);
    Flags accept_flags;
    accept_flags.out = "acceptance_out";
    add_flags(app.add_subcommand("accept", "run the acceptance suite"), accept_flags, false);

    CLI11_PARSE(app, argc, argv);

    for (const auto& [name, help, types] : commands)
        if (app.got_subcommand(name)) return run(name, types, flags[name]);
    return accept(accept_flags);
}
