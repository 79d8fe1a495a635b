#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retimer.h"

namespace {

struct SubArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

int run_command(rt_status (*fn)(const rt_config*), const SubArgs& args) {
    rt_config* cfg = nullptr;
    if (rt_config_create(&cfg) != RT_OK) {
        std::fprintf(stderr, "error: %s\n", rt_last_error());
        return 2;
    }
    // Config construction problems are user errors: exit 1.
    if (rt_config_load(cfg, args.config_path.c_str()) != RT_OK) {
        std::fprintf(stderr, "error: %s\n", rt_last_error());
        rt_config_free(cfg);
        return 1;
    }
    for (const std::string& kv : args.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            rt_config_free(cfg);
            return 1;
        }
        if (rt_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()) != RT_OK) {
            std::fprintf(stderr, "error: %s\n", rt_last_error());
            rt_config_free(cfg);
            return 1;
        }
    }
    rt_status status = fn(cfg);
    rt_config_free(cfg);
    if (status == RT_OK) return 0;
    std::fprintf(stderr, "error: %s\n", rt_last_error());
    return status == RT_ERR_INVALID_ARGUMENT || status == RT_ERR_PARSE ? 1 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"timing-only adversarial attacks on event-driven spiking networks"};
    app.require_subcommand(1);

    struct Command {
        const char* name;
        const char* help;
        rt_status (*fn)(const rt_config*);
    };
    const Command commands[] = {
        {"gen-data", "generate a synthetic timing-coded dataset", rt_cmd_gen_data},
        {"train", "train a spiking classifier", rt_cmd_train},
        {"attack", "run the retiming attack on one grid or a test split", rt_cmd_attack},
        {"at-train", "adversarially train a classifier", rt_cmd_at_train},
        {"defend-eval", "evaluate an input filter under attack", rt_cmd_defend_eval},
        {"project", "strict-project a distribution dump onto a grid", rt_cmd_project},
        {"sweep", "accuracy and attack success over a radius sweep", rt_cmd_sweep},
        {"report", "re-emit a metrics CSV", rt_cmd_report},
    };

    std::map<std::string, SubArgs> args;
    for (const Command& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", args[cmd.name].config_path, "key=value config file")
            ->required();
        sub->add_option("--set", args[cmd.name].overrides, "override a config key")
            ->type_name("KEY=VALUE");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    for (const Command& cmd : commands)
        if (app.got_subcommand(cmd.name)) return run_command(cmd.fn, args[cmd.name]);
    return 1;
}
