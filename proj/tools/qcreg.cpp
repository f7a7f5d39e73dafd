// qcreg: quasi-conformal landmark and hybrid registration from the command line.

#include <qcreg/job.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

struct Subcommand {
    const char* name;
    const char* mode;
    const char* help;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quasi-conformal registration of planar meshes and images"};
    app.require_subcommand(1);

    const Subcommand subs[] = {
        {"register-landmark", "landmark", "landmark-matching registration of a mesh or image grid"},
        {"register-hybrid", "hybrid", "landmark and intensity registration of two PGM images"},
        {"validate", "validate", "quality report (flips, dilation, landmark error) of a map"},
        {"render", "render", "deformed-grid raster and, for image sources, the warped image"},
    };

    std::string config_path;
    std::map<std::string, std::string> flags;
    std::map<std::string, std::string> mode_of;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        mode_of[s.name] = s.mode;
        sub->add_option("-c,--config", config_path, "key=value configuration file");
        for (const auto& key : qcreg::config_keys()) {
            if (std::string(key.name) == "mode") continue;
            sub->add_option_function<std::string>(
                std::string("--") + key.name, [&flags, name = std::string(key.name)](const std::string& v) { flags[name] = v; },
                key.help);
        }
    }

    CLI11_PARSE(app, argc, argv);

    try {
        std::map<std::string, std::string> kv;
        if (!config_path.empty()) kv = qcreg::read_key_value_file(config_path);
        for (const auto& [k, v] : flags) kv[k] = v;
        kv["mode"] = mode_of.at(app.get_subcommands().front()->get_name());
        const qcreg::JobConfig cfg = qcreg::job_config_from(kv);
        const qcreg::JobOutcome outcome = qcreg::run_job(cfg, std::cout);
        if (outcome.exit_code != 0)
            std::cerr << "error category=" << outcome.category << " message=" << outcome.message << '\n';
        return outcome.exit_code;
    } catch (const qcreg::InputError& e) {
        std::cerr << "error category=input message=" << e.what() << '\n';
        return 2;
    } catch (const qcreg::NumericalError& e) {
        std::cerr << "error category=numerical message=" << e.what() << '\n';
        return 3;
    }
}
