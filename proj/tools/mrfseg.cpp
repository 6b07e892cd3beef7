#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrfseg/emission.hpp"
#include "mrfseg/graphcut.hpp"
#include "mrfseg/icm.hpp"
#include "mrfseg/metrics.hpp"
#include "mrfseg/pcvt.hpp"
#include "mrfseg/pgm_io.hpp"
#include "mrfseg/synth.hpp"

// Command-line surface. Exit codes: 0 success, 2 configuration error, 3 IO
// error, 4 numeric or domain error.

namespace {

using namespace mrfseg;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string join(const std::vector<double>& values) {
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ",";
        out << values[i];
    }
    return out.str();
}

std::string join_int(const std::vector<int>& values) {
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ",";
        out << values[i];
    }
    return out.str();
}

// Comma lists arrive as one token ("60,100") so they can never swallow the
// positional arguments that follow them.
std::vector<double> parse_double_list(const std::string& csv, const char* flag) {
    std::vector<double> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": not a number: '" + item + "'");
        }
        if (used != item.size())
            throw ConfigError(std::string(flag) + ": not a number: '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(std::string(flag) + ": empty list");
    return out;
}

std::vector<int> parse_int_list(const std::string& csv, const char* flag) {
    std::vector<int> out;
    for (double v : parse_double_list(csv, flag)) {
        if (v != std::floor(v) || std::abs(v) > 1e9)
            throw ConfigError(std::string(flag) + ": not an integer list");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

ClassParams supervised_params(const std::vector<double>& mu, const std::vector<double>& sigma,
                              int label_count) {
    if (static_cast<int>(mu.size()) != label_count)
        throw ConfigError("--mu needs exactly " + std::to_string(label_count) + " values");
    if (static_cast<int>(sigma.size()) != label_count)
        throw ConfigError("--sigma needs exactly " + std::to_string(label_count) + " values");
    std::vector<GaussianClass> classes(label_count);
    for (int l = 0; l < label_count; ++l) {
        if (!(sigma[l] > 0.0)) throw ConfigError("--sigma values must be positive");
        classes[l].mean = Eigen::VectorXd::Constant(1, mu[l]);
        classes[l].cov = Eigen::MatrixXd::Constant(1, 1, sigma[l] * sigma[l]);
        classes[l].freq = 1.0 / label_count;
    }
    return ClassParams(std::move(classes));
}

struct SimulateArgs {
    std::string phantom = "two-circles";
    std::vector<int> size = {241, 241};
    int stripe_width = 16;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::uint64_t seed = 0;
    bool filter = false;
    bool quantize_gray = false;
    std::string out_prefix = "sim";
};

void run_simulate(const SimulateArgs& args) {
    std::vector<int> size = args.size;
    if (size.size() == 1) size.push_back(size[0]);
    if (size.size() != 2 || size[0] < 32 || size[1] < 32)
        throw ConfigError("--size needs one or two values, each at least 32");
    LabelMap truth = args.phantom == "two-circles"
                         ? two_circles(size[0], size[1])
                         : stripes(size[0], size[1], args.stripe_width);
    if (args.mu.size() != 2 || args.sigma.size() != 2)
        throw ConfigError("--mu and --sigma need two values for a two-class phantom");

    NoiseSpec spec;
    spec.seed = args.seed;
    for (int l = 0; l < 2; ++l) {
        if (!(args.sigma[l] > 0.0)) throw ConfigError("--sigma values must be positive");
        spec.classes.push_back({args.mu[l], args.sigma[l]});
    }
    MultiSpectralImage image = render_noise(truth, spec);
    if (args.quantize_gray) image = quantize(image);

    const std::string truth_path = args.out_prefix + "_truth.pgm";
    const std::string image_path = args.out_prefix + "_image.pgm";
    write_label_map(truth_path, truth);
    write_image(image_path, image);

    std::vector<std::pair<std::string, std::string>> manifest = {
        {"command", "simulate"},
        {"phantom", args.phantom},
        {"height", std::to_string(size[0])},
        {"width", std::to_string(size[1])},
        {"mu", join(args.mu)},
        {"sigma", join(args.sigma)},
        {"seed", std::to_string(args.seed)},
        {"quantize", args.quantize_gray ? "1" : "0"},
        {"filter", args.filter ? "1" : "0"},
        {"truth", truth_path},
        {"image", image_path},
    };
    if (args.phantom == "stripes")
        manifest.emplace_back("stripe_width", std::to_string(args.stripe_width));
    if (args.filter) {
        const std::string filtered_path = args.out_prefix + "_filtered.pgm";
        write_image(filtered_path, smooth(image));
        manifest.emplace_back("filtered", filtered_path);
    }
    write_manifest(args.out_prefix + "_manifest.txt", manifest);
}

struct SegmentArgs {
    std::string method;
    std::string init = "em";
    int label_count = 2;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::string init_file;
    std::string em_init = "modes";
    std::uint64_t seed = 0;
    int n_paths = 20;
    int max_iter = 100;
    std::optional<double> beta;
    std::string report_path;
    std::string input;
    std::string output;
};

void run_segment(const SegmentArgs& args) {
    const auto t0 = std::chrono::steady_clock::now();
    const MultiSpectralImage image = read_image(args.input);
    image.validate_finite();

    LabelMap init(1, 1, 1);
    std::optional<ClassParams> params;
    if (args.init == "supervised") {
        if (args.mu.empty()) throw ConfigError("--init supervised requires --mu and --sigma");
        if (image.bands() != 1)
            throw ConfigError("--init supervised supports single-band images");
        params = supervised_params(args.mu, args.sigma, args.label_count);
        init = ml_classify(image, *params);
    } else if (args.init == "em") {
        EmInit seeding = args.em_init == "random" ? EmInit(RandomSeed{args.seed})
                                                  : EmInit(HistogramModeSeed{});
        EmFitReport fit = em_fit(image, args.label_count, seeding);
        params = *fit.params;
        init = ml_classify(image, *params);
    } else if (args.init == "file") {
        if (args.init_file.empty()) throw ConfigError("--init file requires --init-file");
        init = read_label_map(args.init_file);
        params = estimate_class_params(image, init);
    } else {
        throw ConfigError("unknown --init: " + args.init);
    }

    std::vector<std::pair<std::string, std::string>> report = {
        {"command", "segment"},
        {"method", args.method},
        {"init", args.init},
        {"classes", std::to_string(params->class_count())},
    };

    LabelMap result = init;
    if (args.method == "ml" || args.method == "em") {
        if (args.method == "em" && args.init != "em")
            throw ConfigError("--method em requires --init em");
    } else if (args.method == "icm") {
        IcmOptions options;
        options.max_iter = args.max_iter;
        options.beta_override = args.beta;
        IcmReport icm = icm_segment(image, init, *params, options);
        result = icm.labels;
        report.emplace_back("iterations", std::to_string(icm.iterations));
        report.emplace_back("converged", icm.converged ? "1" : "0");
        report.emplace_back("beta_trace", join(icm.beta_trace));
        report.emplace_back("changed_per_iteration", join_int(icm.changed_per_iteration));
    } else if (args.method == "gc") {
        ExpansionReport gc = args.beta
                                 ? alpha_expansion(image, init, *params,
                                                   std::max(0.0, *args.beta), args.max_iter)
                                 : gc_segment(image, init, *params, args.max_iter);
        result = gc.labels;
        report.emplace_back("cycles", std::to_string(gc.cycles));
        report.emplace_back("converged", gc.converged ? "1" : "0");
        report.emplace_back("beta", std::to_string(gc.beta_used));
        report.emplace_back("energy_trace", join(gc.energy_trace));
    } else if (args.method == "pcvt") {
        PcvtReport pcvt = pcvt_segment(image, init, args.n_paths, args.max_iter);
        result = pcvt.labels;
        report.emplace_back("iterations", std::to_string(pcvt.iterations));
        report.emplace_back("converged", pcvt.converged ? "1" : "0");
        report.emplace_back("paths", std::to_string(pcvt.n_used));
        report.emplace_back("log_prob_trace", join(pcvt.decoded_log_prob_trace));
    } else {
        throw ConfigError("unknown --method: " + args.method);
    }

    write_label_map(args.output, result);
    report.emplace_back("output", args.output);
    report.emplace_back("wall_seconds", std::to_string(seconds_since(t0)));
    if (!args.report_path.empty()) write_manifest(args.report_path, report);
}

struct EvaluateArgs {
    std::string truth;
    std::string predicted;
    std::string out_csv;
    std::string method_name = "method";
    std::optional<double> oa_ml_percent;
    double alpha = 0.05;
};

void run_evaluate(const EvaluateArgs& args) {
    const LabelMap truth = read_label_map(args.truth);
    const LabelMap predicted = read_label_map(args.predicted);
    const ConfusionMatrix cm = confusion(truth, predicted);
    MethodScore row;
    row.method = args.method_name;
    row.oa = overall_accuracy(cm);
    row.kappa = kappa_interval(cm, args.alpha);
    row.ri_percent = args.oa_ml_percent
                         ? relative_improvement_percent(100.0 * row.oa, *args.oa_ml_percent)
                         : 0.0;
    write_text_file(args.out_csv, method_scores_csv({row}));
}

struct SweepArgs {
    std::string truth;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::uint64_t seed = 0;
    bool quantize_gray = false;
    std::vector<int> n_list = {1, 2, 20, 250};
    int max_iter = 100;
    std::string out_csv;
};

void run_sweep(const SweepArgs& args) {
    const LabelMap truth = read_label_map(args.truth);
    if (truth.label_count() != 2) throw ConfigError("sweep-n expects a two-class pattern");
    NoiseSpec spec;
    spec.seed = args.seed;
    if (args.mu.size() != 2 || args.sigma.size() != 2)
        throw ConfigError("--mu and --sigma need two values");
    for (int l = 0; l < 2; ++l) {
        if (!(args.sigma[l] > 0.0)) throw ConfigError("--sigma values must be positive");
        spec.classes.push_back({args.mu[l], args.sigma[l]});
    }
    MultiSpectralImage image = render_noise(truth, spec);
    if (args.quantize_gray) image = quantize(image);

    const ClassParams params = supervised_params(args.mu, args.sigma, 2);
    const LabelMap init = ml_classify(image, params);
    const double oa_ml = overall_accuracy_percent(confusion(truth, init));

    std::string csv = "N,iterations,seconds,RI\n";
    for (int n : args.n_list) {
        if (n < 1) throw ConfigError("--N-list entries must be positive");
        const auto t0 = std::chrono::steady_clock::now();
        const PcvtReport rep = pcvt_segment(image, init, n, args.max_iter);
        const double dt = seconds_since(t0);
        const double oa = overall_accuracy_percent(confusion(truth, rep.labels));
        char line[128];
        std::snprintf(line, sizeof(line), "%d,%d,%.3f,%.4f\n", n, rep.iterations, dt,
                      relative_improvement_percent(oa, oa_ml));
        csv += line;
    }
    write_text_file(args.out_csv, csv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MAP segmentation of noisy rasters with Potts and Markov-mesh priors"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "render a noisy synthetic phantom");
    simulate->add_option("--phantom", sim.phantom)
        ->check(CLI::IsMember({"two-circles", "stripes"}));
    std::string sim_size_csv, sim_mu_csv, sim_sigma_csv;
    simulate->add_option("--size", sim_size_csv);
    simulate->add_option("--stripe-width", sim.stripe_width);
    simulate->add_option("--mu", sim_mu_csv)->required();
    simulate->add_option("--sigma", sim_sigma_csv)->required();
    simulate->add_option("--seed", sim.seed);
    simulate->add_flag("--filter", sim.filter);
    simulate->add_flag("--quantize", sim.quantize_gray);
    simulate->add_option("--out-prefix", sim.out_prefix);

    SegmentArgs seg;
    CLI::App* segment = app.add_subcommand("segment", "segment an image into classes");
    segment->add_option("--method", seg.method)
        ->required()
        ->check(CLI::IsMember({"ml", "em", "icm", "gc", "pcvt"}));
    segment->add_option("--init", seg.init)
        ->check(CLI::IsMember({"supervised", "em", "file"}));
    segment->add_option("--L", seg.label_count)->check(CLI::Range(2, 256));
    std::string seg_mu_csv, seg_sigma_csv;
    segment->add_option("--mu", seg_mu_csv);
    segment->add_option("--sigma", seg_sigma_csv);
    segment->add_option("--init-file", seg.init_file);
    segment->add_option("--em-init", seg.em_init)->check(CLI::IsMember({"modes", "random"}));
    segment->add_option("--seed", seg.seed);
    segment->add_option("--N", seg.n_paths)->check(CLI::PositiveNumber);
    segment->add_option("--max-iter", seg.max_iter)->check(CLI::PositiveNumber);
    double beta_value = 0.0;
    CLI::Option* beta_opt = segment->add_option("--beta", beta_value);
    segment->add_option("--report", seg.report_path);
    segment->add_option("input", seg.input)->required();
    segment->add_option("output", seg.output)->required();

    EvaluateArgs eval;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a prediction against truth");
    evaluate->add_option("truth", eval.truth)->required();
    evaluate->add_option("predicted", eval.predicted)->required();
    evaluate->add_option("out_csv", eval.out_csv)->required();
    evaluate->add_option("--method-name", eval.method_name);
    double oa_ml_value = 0.0;
    CLI::Option* oa_ml_opt = evaluate->add_option("--oa-ml", oa_ml_value);
    evaluate->add_option("--alpha", eval.alpha)->check(CLI::Range(1e-9, 0.999999));

    SweepArgs sweep;
    CLI::App* sweep_n = app.add_subcommand("sweep-n", "path-count sweep on one noisy pattern");
    sweep_n->add_option("--truth", sweep.truth)->required();
    std::string sweep_mu_csv, sweep_sigma_csv, sweep_n_csv;
    sweep_n->add_option("--mu", sweep_mu_csv)->required();
    sweep_n->add_option("--sigma", sweep_sigma_csv)->required();
    sweep_n->add_option("--seed", sweep.seed);
    sweep_n->add_flag("--quantize", sweep.quantize_gray);
    sweep_n->add_option("--N-list", sweep_n_csv);
    sweep_n->add_option("--max-iter", sweep.max_iter)->check(CLI::PositiveNumber);
    sweep_n->add_option("--out", sweep.out_csv)->required();

    try {
        app.parse(argc, argv);
        if (*beta_opt) seg.beta = beta_value;
        if (*oa_ml_opt) eval.oa_ml_percent = oa_ml_value;
        if (!sim_size_csv.empty()) sim.size = parse_int_list(sim_size_csv, "--size");
        if (!sim_mu_csv.empty()) sim.mu = parse_double_list(sim_mu_csv, "--mu");
        if (!sim_sigma_csv.empty()) sim.sigma = parse_double_list(sim_sigma_csv, "--sigma");
        if (!seg_mu_csv.empty()) seg.mu = parse_double_list(seg_mu_csv, "--mu");
        if (!seg_sigma_csv.empty()) seg.sigma = parse_double_list(seg_sigma_csv, "--sigma");
        if (!sweep_mu_csv.empty()) sweep.mu = parse_double_list(sweep_mu_csv, "--mu");
        if (!sweep_sigma_csv.empty())
            sweep.sigma = parse_double_list(sweep_sigma_csv, "--sigma");
        if (!sweep_n_csv.empty()) sweep.n_list = parse_int_list(sweep_n_csv, "--N-list");
        if (simulate->parsed()) run_simulate(sim);
        if (segment->parsed()) run_segment(seg);
        if (evaluate->parsed()) run_evaluate(eval);
        if (sweep_n->parsed()) run_sweep(sweep);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "domain error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
