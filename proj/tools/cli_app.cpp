#include "cli_app.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "raptor/config.hpp"
#include "raptor/evaluation.hpp"
#include "raptor/nifti_io.hpp"
#include "raptor/optimizer.hpp"
#include "raptor/parallel.hpp"
#include "raptor/phantom.hpp"

namespace raptor::cli {

namespace {

using nlohmann::json;

struct RegisterArgs {
    std::string fixed;
    std::string moving;
    std::string metric;
    std::string out_warped;
    std::string out_field;
    std::string out_trace;
    std::string out_summary;
    std::string config_path;
    int threads = 0;
    std::vector<std::string> overrides;
};

std::string default_sibling(const std::string& anchor, const std::string& suffix) {
    std::filesystem::path p(anchor);
    std::string stem = p.filename().string();
    const auto pos = stem.find(".nii");
    if (pos != std::string::npos) stem = stem.substr(0, pos);
    return (p.parent_path() / (stem + suffix)).string();
}

void apply_overrides(RegistrationConfig& cfg, const std::vector<std::string>& overrides) {
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw IoError("override '" + kv + "' is not of the form key=value");
        apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
}

// Removes everything this run managed to write before it failed.
class OutputTracker {
public:
    void wrote(const std::string& path) { written_.push_back(path); }
    void discard_all() {
        for (const auto& p : written_) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
    }

private:
    std::vector<std::string> written_;
};

int run_register(const RegisterArgs& args) {
    par::set_num_threads(args.threads > 0 ? args.threads : par::hardware_threads());

    RegistrationConfig cfg;
    if (!args.config_path.empty()) load_config_file(cfg, args.config_path);
    if (!args.metric.empty()) apply_config_entry(cfg, "metric", args.metric);
    apply_overrides(cfg, args.overrides);

    const Volume fixed = read_volume(args.fixed);
    const Volume moving = read_volume(args.moving);

    const std::string out_trace =
        args.out_trace.empty() ? default_sibling(args.out_warped, "_trace.csv") : args.out_trace;
    const std::string out_summary =
        args.out_summary.empty() ? default_sibling(args.out_warped, "_summary.json") : args.out_summary;

    OutputTracker outputs;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        const RegistrationResult result = minimize(fixed, moving, cfg);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const Volume det = jacobian_determinant(result.inverse_map);
        std::int64_t nonpositive = 0;
        for (std::size_t n = 0; n < det.size(); ++n)
            if (det[n] <= 0.0) ++nonpositive;

        write_volume(result.warped, args.out_warped);
        outputs.wrote(args.out_warped);
        write_displacement_field(result.inverse_map, args.out_field);
        outputs.wrote(args.out_field);

        {
            std::ofstream trace(out_trace);
            if (!trace) throw IoError("cannot open " + out_trace + " for writing");
            outputs.wrote(out_trace);
            trace << "level,iteration,data,reg,total\n";
            for (const EnergyRecord& r : result.energy_trace)
                trace << r.level << "," << r.iteration << "," << r.data << "," << r.reg << ","
                      << r.total << "\n";
        }

        {
            json summary;
            json config_echo;
            for (const auto& [k, v] : config_entries(cfg)) config_echo[k] = v;
            summary["config"] = config_echo;
            summary["fixed"] = args.fixed;
            summary["moving"] = args.moving;
            summary["threads"] = par::num_threads();
            summary["converged"] = result.converged;
            summary["iterations"] = result.energy_trace.back().iteration;
            summary["final_data"] = result.energy_trace.back().data;
            summary["final_reg"] = result.energy_trace.back().reg;
            summary["final_total"] = result.energy_trace.back().total;
            summary["initial_total"] = result.energy_trace.front().total;
            summary["min_det_jacobian"] = det.min_value();
            summary["nonpositive_jacobian_voxels"] = nonpositive;
            summary["runtime_seconds"] = seconds;
            std::ofstream out(out_summary);
            if (!out) throw IoError("cannot open " + out_summary + " for writing");
            outputs.wrote(out_summary);
            out << summary.dump(2) << "\n";
        }
        return 0;
    } catch (...) {
        outputs.discard_all();
        throw;
    }
}

int run_dice(const std::string& a_path, const std::string& b_path, int label) {
    const LabelMap a = read_label_map(a_path);
    const LabelMap b = read_label_map(b_path);
    const double d = dice(a, b, label);
    std::cout << label << "," << d << "," << a.count(label) << "," << b.count(label) << "\n";
    return 0;
}

int run_jacobian(const std::string& field_path, double bin_width, const std::string& out_path) {
    const DisplacementField field = read_displacement_field(field_path);
    const JacobianHistogram hist = jacobian_histogram(field, bin_width);

    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open " + out_path + " for writing");
    out << "# nonpositive," << hist.nonpositive << "\n";
    out << "bin_center,count\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i)
        out << hist.center(i) << "," << hist.counts[i] << "\n";

    std::cout << "total=" << hist.total << " nonpositive=" << hist.nonpositive
              << " mass_within_0.2=" << hist.mass_within(0.2) << "\n";
    return 0;
}

int run_phantom(const std::string& kind, const std::vector<int>& dims_arg, const std::string& out,
                const std::string& out_labels, const PhantomParams& params) {
    PhantomKind k;
    if (kind == "sphere") k = PhantomKind::sphere;
    else if (kind == "checker") k = PhantomKind::checker;
    else if (kind == "ramp") k = PhantomKind::ramp;
    else throw IoError("phantom kind must be sphere, checker, or ramp");

    Dims dims;
    if (dims_arg.size() == 1) dims = {dims_arg[0], dims_arg[0], dims_arg[0]};
    else if (dims_arg.size() == 3) dims = {dims_arg[0], dims_arg[1], dims_arg[2]};
    else throw IoError("--dims expects one or three integers");

    const auto [volume, labels] = make_phantom(k, dims, params);
    write_volume(volume, out);
    if (!out_labels.empty()) write_label_map(labels, out_labels);
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"diffeomorphic inter-modal registration with patch-based correlation ratio"};
    app.require_subcommand(1);

    // register
    RegisterArgs reg;
    CLI::App* reg_cmd = app.add_subcommand("register", "register moving onto fixed");
    reg_cmd->add_option("--fixed", reg.fixed, "fixed (reference) volume")->required();
    reg_cmd->add_option("--moving", reg.moving, "moving (source) volume")->required();
    reg_cmd->add_option("--metric", reg.metric, "raptor | ssd")
        ->check(CLI::IsMember({"raptor", "ssd"}));
    reg_cmd->add_option("--out-warped", reg.out_warped, "output warped moving volume")->required();
    reg_cmd->add_option("--out-field", reg.out_field, "output displacement field (3-component NIfTI)")
        ->required();
    reg_cmd->add_option("--out-trace", reg.out_trace, "energy trace CSV (default: <warped>_trace.csv)");
    reg_cmd->add_option("--out-summary", reg.out_summary,
                        "JSON run summary (default: <warped>_summary.json)");
    reg_cmd->add_option("--config", reg.config_path, "key=value config file");
    reg_cmd->add_option("--threads", reg.threads, "worker threads (default: all cores; 1 for bitwise reproducibility)");
    reg_cmd->add_option("overrides", reg.overrides, "key=value config overrides");

    // evaluate dice
    std::string labels_a, labels_b;
    int label = 1;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluation reports");
    eval_cmd->require_subcommand(1);
    CLI::App* dice_cmd = eval_cmd->add_subcommand("dice", "Dice overlap of one label");
    dice_cmd->add_option("--labels-a", labels_a, "first label map")->required();
    dice_cmd->add_option("--labels-b", labels_b, "second label map")->required();
    dice_cmd->add_option("--label", label, "label value")->required();

    // jacobian
    std::string field_path, hist_out;
    double bin_width = 0.05;
    CLI::App* jac_cmd = app.add_subcommand("jacobian", "log10 det J histogram of a field");
    jac_cmd->add_option("--field", field_path, "displacement field NIfTI")->required();
    jac_cmd->add_option("--bin-width", bin_width, "histogram bin width in log10 units");
    jac_cmd->add_option("--out", hist_out, "output CSV")->required();

    // phantom
    std::string kind = "sphere", phantom_out, phantom_labels;
    std::vector<int> dims_arg{64};
    PhantomParams params;
    double radius = -1.0;
    CLI::App* ph_cmd = app.add_subcommand("phantom", "generate a synthetic volume + labels");
    ph_cmd->add_option("--kind", kind, "sphere | checker | ramp");
    ph_cmd->add_option("--dims", dims_arg, "grid size (one or three integers)");
    ph_cmd->add_option("--out", phantom_out, "output volume")->required();
    ph_cmd->add_option("--out-labels", phantom_labels, "output label map");
    ph_cmd->add_option("--radius", radius, "sphere radius in voxels");
    ph_cmd->add_option("--period", params.period, "checker stripe period in voxels");
    ph_cmd->add_option("--texture", params.texture_amplitude, "smooth texture amplitude");
    ph_cmd->add_option("--noise", params.noise_stddev, "iid gaussian noise stddev");
    ph_cmd->add_option("--seed", params.seed, "seed for texture/noise");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*reg_cmd) return run_register(reg);
        if (*eval_cmd) return run_dice(labels_a, labels_b, label);
        if (*jac_cmd) return run_jacobian(field_path, bin_width, hist_out);
        if (*ph_cmd) {
            params.radius = radius;
            return run_phantom(kind, dims_arg, phantom_out, phantom_labels, params);
        }
    } catch (const FileNotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace raptor::cli
