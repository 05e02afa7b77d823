// itdlpcc: learned voxel-block point cloud codec CLI.
//
//   itdlpcc [--with_color] compress   input.ply model_dir output_dir [opts]
//   itdlpcc [--with_color] decompress input.bin model_dir [opts]
//   itdlpcc train / train-abu / evaluate / rd-sweep ...

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "itpcc/checkpoint.hpp"
#include "itpcc/codec.hpp"
#include "itpcc/ply.hpp"
#include "itpcc/quality.hpp"
#include "itpcc/sampling.hpp"

namespace fs = std::filesystem;
using namespace itpcc;

namespace {

// ---------- small utilities ----------

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_csv(s)) out.push_back(std::stod(item));
    return out;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
}

// ---------- model loading ----------

CodingModel<float> load_codec_model(const std::string& dir) {
    Checkpoint ckpt = load_checkpoint((fs::path(dir) / "codec.ckpt").string());
    CodecArch arch = CodecArch::from_json(ckpt.arch_json);
    CodingModel<float> model(arch, 0);
    auto params = model.params();
    restore_params(ckpt, params);
    return model;
}

AbuModel<float> load_abu_model(const std::string& dir) {
    Checkpoint ckpt = load_checkpoint((fs::path(dir) / "abu.ckpt").string());
    AbuArch arch = AbuArch::from_json(ckpt.arch_json);
    AbuModel<float> model(arch, 0);
    auto params = model.params();
    restore_params(ckpt, params);
    return model;
}

// Picks the ABU checkpoint whose training scale matches `sf` from a
// comma-separated directory list.
AbuModel<float> load_abu_for_scale(const std::string& dirs_csv, double sf) {
    if (dirs_csv.empty())
        throw std::runtime_error("--use_abu requires --abu_model_dir");
    for (const auto& dir : split_csv(dirs_csv)) {
        AbuModel<float> m = load_abu_model(dir);
        if (double(m.arch().sf) == sf) return m;
    }
    throw std::runtime_error("no ABU model for scale " + std::to_string(sf) +
                             " in --abu_model_dir");
}

std::vector<PointCloud> load_clouds(const std::vector<std::string>& inputs) {
    std::vector<PointCloud> clouds;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(in))
                if (e.path().extension() == ".ply") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) clouds.push_back(load_ply(f.string()));
        } else {
            clouds.push_back(load_ply(in));
        }
    }
    if (clouds.empty()) throw std::runtime_error("no input point clouds found");
    return clouds;
}

// ---------- shared compress option block ----------

struct CompressOpts {
    int blk_size = 128;
    double q_step = 1.0;
    std::string scale = "None";
    std::string topk_metrics = "d1yuv";
    double color_weight = 0.5;
    bool use_fast_topk = false;
    int max_topk = 10;
    int topk_patience = 5;
    bool use_abu = false;
    std::string abu_model_dir;
    std::string abu_topk = "full";
    int abu_max_topk = 10;
};

void add_compress_flags(CLI::App* cmd, CompressOpts& o) {
    cmd->add_option("--blk_size", o.blk_size,
                    "Size of the 3D coding block units. Should be a multiple of 64. "
                    "(default: 128)");
    cmd->add_option("--q_step", o.q_step,
                    "Explicit quantization step. Can be any positive real value. "
                    "(default: 1)");
    cmd->add_option("--scale", o.scale,
                    "Down-sampling scale. If 'None', it is automatically determined. "
                    "Multiple comma separated values can be provided. Can be any "
                    "positive real value when not using ABU, otherwise only an "
                    "integer power of 2. (default: None)");
    cmd->add_option("--topk_metrics", o.topk_metrics,
                    "Metrics to use for the optimized Top-k binarization. Available: "
                    "'d1', 'd2', 'd1yuv', 'd2yuv', 'd1rgb', 'd2rgb'. If coding "
                    "geometry-only, only the geometry metric is used. "
                    "(default: d1yuv)");
    cmd->add_option("--color_weight", o.color_weight,
                    "Weight of the colour metric in the joint top-k optimization. "
                    "Between 0 and 1. (default: 0.5)");
    cmd->add_flag("--use_fast_topk", o.use_fast_topk,
                  "Use faster top-k optimization algorithm for the coding model. "
                  "(default: False)");
    cmd->add_option("--max_topk", o.max_topk,
                    "Define the maximum factor used by the Top-K optimization "
                    "algorithms. (default: 10)");
    cmd->add_option("--topk_patience", o.topk_patience,
                    "Define the patience for early stopping in the Top-K "
                    "optimization algorithms. (default: 5)");
    cmd->add_flag("--use_abu", o.use_abu,
                  "Use Basic Up-sampling (False) or Advanced Block Up-sampling - "
                  "ABU (True). (default: False)");
    cmd->add_option("--abu_model_dir", o.abu_model_dir,
                    "Directory where to load ABU model. A directory should be "
                    "provided for each down-sampling scale, separated by commas. "
                    "(default: )");
    cmd->add_option("--abu_topk", o.abu_topk,
                    "Type of Top-k optimization for the ABU at the encoder: 'none' "
                    "- Use the same as the coding model. 'full' - Use the regular "
                    "algorithm (default). 'fast' - Use the faster algorithm.");
    cmd->add_option("--abu_max_topk", o.abu_max_topk,
                    "Define the maximum factor used by the Top-K optimization "
                    "algorithms. (default: 10)");
}

EncoderConfig to_encoder_config(const CompressOpts& o, bool with_color,
                                std::optional<double> sf) {
    EncoderConfig cfg;
    cfg.blk_size = o.blk_size;
    cfg.qs = o.q_step;
    cfg.sf = sf;
    cfg.with_color = with_color;
    cfg.topk.metric = parse_topk_metric(o.topk_metrics);
    cfg.topk.color_weight = o.color_weight;
    cfg.topk.max_topk = o.max_topk;
    cfg.topk.patience = o.topk_patience;
    cfg.topk.fast = o.use_fast_topk;
    cfg.use_abu = o.use_abu;
    cfg.abu_mode = parse_abu_mode(o.abu_topk);
    cfg.abu_max_topk = o.abu_max_topk;
    return cfg;
}

// ---------- subcommand bodies ----------

int run_compress(bool with_color, const CompressOpts& o, const std::string& input,
                 const std::string& model_dir, const std::string& output_dir) {
    PointCloud pc = load_ply(input);
    CodingModel<float> model = load_codec_model(model_dir);
    fs::create_directories(output_dir);
    std::string stem = fs::path(input).stem().string();

    std::vector<std::optional<double>> scales;
    if (o.scale == "None") {
        scales.push_back(std::nullopt);
    } else {
        for (double s : parse_doubles(o.scale)) scales.push_back(s);
    }
    for (const auto& sf : scales) {
        EncoderConfig cfg = to_encoder_config(o, with_color, sf);
        double actual_sf = sf ? *sf : auto_scale(pc);
        std::optional<AbuModel<float>> abu;
        if (cfg.use_abu) abu.emplace(load_abu_for_scale(o.abu_model_dir, actual_sf));
        Bitstream bs = encode(pc, model, abu ? &*abu : nullptr, cfg);
        auto bytes = serialize(bs);

        std::string name = stem;
        if (scales.size() > 1) name += "_sf" + std::to_string(actual_sf);
        std::string out = (fs::path(output_dir) / (name + ".bin")).string();
        write_file(out, bytes);
        std::printf("%s: %zu blocks, %zu bytes, %.4f bpp (sf=%g, qs=%g)\n",
                    out.c_str(), bs.blocks.size(), bytes.size(),
                    bpp(bytes.size(), pc.size()), actual_sf, o.q_step);
    }
    return 0;
}

int run_decompress(bool with_color, const std::string& input,
                   const std::string& model_dir, const std::string& abu_dirs) {
    Bitstream bs = deserialize(read_file(input));
    if (bs.header.with_color != with_color)
        throw std::runtime_error(
            "bitstream colour mode does not match --with_color");
    CodingModel<float> model = load_codec_model(model_dir);
    std::optional<AbuModel<float>> abu;
    if (bs.header.with_abu)
        abu.emplace(load_abu_for_scale(abu_dirs, double(bs.header.sf)));
    PointCloud pc = decode(bs, model, abu ? &*abu : nullptr);

    fs::path out = fs::path(input);
    out.replace_extension(".dec.ply");
    save_ply(pc, out.string());
    std::printf("%s: %zu points\n", out.string().c_str(), pc.size());
    return 0;
}

int run_train(bool with_color, const std::vector<std::string>& inputs,
              const std::string& model_dir, int width, int blk_size,
              const TrainConfig& tc, uint32_t min_voxels) {
    auto clouds = load_clouds(inputs);
    auto blocks = make_training_blocks(clouds, blk_size, with_color, min_voxels);
    if (blocks.empty())
        throw std::runtime_error("no training blocks pass the occupancy filter");

    CodecArch arch;
    arch.in_channels = with_color ? 4 : 1;
    arch.width = width;
    CodingModel<float> model(arch, tc.seed);
    TrainResult res = train(model, blocks, {}, tc);

    fs::create_directories(model_dir);
    auto params = model.params();
    save_checkpoint((fs::path(model_dir) / "codec.ckpt").string(),
                    snapshot_params(arch.to_json(), params));
    std::printf("trained %d epochs on %zu blocks; loss %.6f -> %.6f (best val "
                "%.6f)\n",
                res.epochs, blocks.size(), res.initial_train_loss,
                res.final_train_loss, res.best_val_loss);
    return 0;
}

int run_train_abu(bool with_color, const std::vector<std::string>& inputs,
                  const std::string& model_dir, int base, int stages, int sf,
                  int blk_size, const TrainConfig& tc, uint32_t min_voxels) {
    auto clouds = load_clouds(inputs);
    std::vector<AbuPair> pairs;
    for (const auto& pc : clouds) {
        PointCloud rec = upsample_basic(downsample(pc, double(sf)), double(sf));
        for (const auto& target :
             make_training_blocks({pc}, blk_size, with_color, min_voxels)) {
            AbuPair p;
            p.target = target;
            p.input = extract_block(rec, target.origin, blk_size, with_color);
            if (p.input.n_input == 0) continue;
            pairs.push_back(std::move(p));
        }
    }
    if (pairs.empty()) throw std::runtime_error("no training pairs generated");

    AbuArch arch;
    arch.in_channels = with_color ? 4 : 1;
    arch.base = base;
    arch.stages = stages;
    arch.sf = sf;
    AbuModel<float> model(arch, tc.seed);
    TrainResult res = train_abu(model, pairs, {}, sf, tc);

    fs::create_directories(model_dir);
    auto params = model.params();
    save_checkpoint((fs::path(model_dir) / "abu.ckpt").string(),
                    snapshot_params(arch.to_json(), params));
    std::printf("trained %d epochs on %zu pairs; loss %.6f -> %.6f\n", res.epochs,
                pairs.size(), res.initial_train_loss, res.final_train_loss);
    return 0;
}

int run_evaluate(const std::string& ref_path, const std::string& test_path,
                 const std::string& bitstream_path) {
    PointCloud ref = load_ply(ref_path);
    PointCloud test = load_ply(test_path);
    double d1 = psnr_d1(ref, test, ref.precision);
    double d2 = psnr_d2(ref, test, ref.precision);
    double rate = 0.0;
    if (!bitstream_path.empty())
        rate = bpp(read_file(bitstream_path).size(), ref.size());
    if (ref.has_colors() && test.has_colors()) {
        ColorPsnr c = psnr_color(ref, test);
        std::printf("d1,d2,y,u,v,yuv,rgb,bpp\n");
        std::printf("%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", d1, d2, c.y, c.u,
                    c.v, c.yuv, c.rgb, rate);
    } else {
        std::printf("d1,d2,bpp\n");
        std::printf("%.6f,%.6f,%.6f\n", d1, d2, rate);
    }
    return 0;
}

int run_rd_sweep(bool with_color, const CompressOpts& o, const std::string& input,
                 const std::string& model_dir, const std::string& output_csv,
                 const std::string& scales_csv, const std::string& q_steps_csv,
                 const std::string& targets_csv) {
    PointCloud pc = load_ply(input);
    CodingModel<float> model = load_codec_model(model_dir);

    std::vector<double> scales = parse_doubles(scales_csv);
    std::vector<double> q_steps = parse_doubles(q_steps_csv);
    std::vector<double> targets =
        targets_csv.empty()
            ? (with_color ? std::vector<double>{0.1, 0.3, 1.0, 3.0}
                          : std::vector<double>{0.05, 0.15, 0.5, 1.5})
            : parse_doubles(targets_csv);

    std::vector<SweepPoint> points;
    for (double sf : scales) {
        EncoderConfig cfg = to_encoder_config(o, with_color, sf);
        std::optional<AbuModel<float>> abu;
        if (cfg.use_abu && sf >= 2.0)
            abu.emplace(load_abu_for_scale(o.abu_model_dir, sf));
        auto part = rd_sweep(pc, model, abu ? &*abu : nullptr, cfg, {sf}, q_steps);
        points.insert(points.end(), part.begin(), part.end());
    }
    mark_hull(points);

    std::ofstream csv(output_csv);
    if (!csv) throw std::runtime_error("cannot write " + output_csv);
    csv << "sf,qs,bytes,bpp,quality,on_hull,selected_target\n";
    for (const auto& p : points) {
        double selected = 0.0;
        for (double t : targets) {
            auto pick = pick_rate_point(points, t);
            if (pick && pick->sf == p.sf && pick->qs == p.qs) selected = t;
        }
        csv << p.sf << ',' << p.qs << ',' << p.bytes << ',' << p.bpp << ','
            << p.quality << ',' << (p.on_hull ? 1 : 0) << ',' << selected << '\n';
    }
    for (double t : targets)
        if (!pick_rate_point(points, t))
            std::fprintf(stderr, "warning: no hull point within 10%% of %.3f bpp\n",
                         t);
    std::printf("%zu operating points -> %s\n", points.size(), output_csv.c_str());
    return 0;
}

void add_helpfull(CLI::App& app) {
    auto show = [&app]() {
        std::cout << app.help("", CLI::AppFormatMode::All);
        std::exit(0);
    };
    app.add_flag_callback("--helpfull", show, "Show full help message and exit");
    for (auto* sub : app.get_subcommands({}))
        sub->add_flag_callback("--helpfull", show, "Show full help message and exit");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned voxel-block point cloud codec", "itdlpcc"};
    app.require_subcommand(0, 1);
    bool with_color = false;
    app.add_flag("--with_color", with_color,
                 "Use the joint geometry + colour codec (default: geometry-only)");

    // compress
    CompressOpts copts;
    std::string c_input, c_model, c_output;
    auto* compress = app.add_subcommand(
        "compress", "Read a point cloud PLY file, compress it, and write the "
                    "bitstream file");
    compress->add_option("input_file", c_input, "Input point cloud (.ply)")
        ->required();
    compress->add_option("model_dir", c_model, "Directory with codec.ckpt")
        ->required();
    compress->add_option("output_dir", c_output, "Output directory")->required();
    add_compress_flags(compress, copts);

    // decompress
    std::string d_input, d_model, d_abu;
    auto* decompress = app.add_subcommand(
        "decompress", "Read a bitstream file, decode the voxel blocks, and "
                      "reconstruct the point cloud");
    decompress->add_option("input_file", d_input, "Input bitstream (.bin)")
        ->required();
    decompress->add_option("model_dir", d_model, "Directory with codec.ckpt")
        ->required();
    decompress->add_option("--abu_model_dir", d_abu,
                           "Directory where to load ABU model. A directory should "
                           "be provided for each down-sampling scale, separated by "
                           "commas. (default: )");

    // train
    std::vector<std::string> t_inputs;
    std::string t_model;
    int t_width = 32, t_blk = 64;
    uint32_t t_minvox = 500;
    TrainConfig tc;
    auto* train_cmd =
        app.add_subcommand("train", "Train a codec model on PLY clouds");
    train_cmd->add_option("model_dir", t_model, "Output checkpoint directory")
        ->required();
    train_cmd->add_option("inputs", t_inputs, "PLY files or directories")
        ->required();
    train_cmd->add_option("--lambda", tc.lambda, "Rate weight (default: 0.001)");
    train_cmd->add_option("--width", t_width, "Base channel width (default: 32)");
    train_cmd->add_option("--blk_size", t_blk, "Training block size (default: 64)");
    train_cmd->add_option("--max_epochs", tc.max_epochs, "Epoch cap (default: 100)");
    train_cmd->add_option("--lr", tc.lr, "Learning rate (default: 1e-4)");
    train_cmd->add_option("--batch", tc.batch, "Minibatch size (default: 16)");
    train_cmd->add_option("--patience", tc.patience,
                          "Early-stopping patience (default: 5)");
    train_cmd->add_option("--seed", tc.seed, "Initialization seed (default: 1)");
    train_cmd->add_option("--min_voxels", t_minvox,
                          "Minimum occupied voxels per block (default: 500)");

    // train-abu
    std::vector<std::string> a_inputs;
    std::string a_model;
    int a_base = 16, a_stages = 3, a_sf = 2, a_blk = 64;
    uint32_t a_minvox = 100;
    TrainConfig atc;
    auto* train_abu_cmd = app.add_subcommand(
        "train-abu", "Train an up-sampling model on PLY clouds");
    train_abu_cmd->add_option("model_dir", a_model, "Output checkpoint directory")
        ->required();
    train_abu_cmd->add_option("inputs", a_inputs, "PLY files or directories")
        ->required();
    train_abu_cmd->add_option("--sf", a_sf, "Sampling factor >= 2 (default: 2)");
    train_abu_cmd->add_option("--base", a_base, "Base channel count (default: 16)");
    train_abu_cmd->add_option("--stages", a_stages, "U-net depth (default: 3)");
    train_abu_cmd->add_option("--blk_size", a_blk,
                              "Training block size at the original frame "
                              "(default: 64)");
    train_abu_cmd->add_option("--max_epochs", atc.max_epochs,
                              "Epoch cap (default: 100)");
    train_abu_cmd->add_option("--lr", atc.lr, "Learning rate (default: 1e-4)");
    train_abu_cmd->add_option("--patience", atc.patience,
                              "Early-stopping patience (default: 5)");
    train_abu_cmd->add_option("--seed", atc.seed,
                              "Initialization seed (default: 1)");
    train_abu_cmd->add_option("--min_voxels", a_minvox,
                              "Minimum occupied voxels per block (default: 100)");

    // evaluate
    std::string e_ref, e_test, e_bits;
    auto* evaluate = app.add_subcommand(
        "evaluate", "Quality metrics between two PLY clouds (CSV to stdout)");
    evaluate->add_option("reference", e_ref, "Reference cloud (.ply)")->required();
    evaluate->add_option("test", e_test, "Cloud under test (.ply)")->required();
    evaluate->add_option("--bitstream", e_bits,
                         "Bitstream file for bpp accounting (default: none)");

    // rd-sweep
    CompressOpts sopts;
    std::string s_input, s_model, s_csv;
    std::string s_scales = "1,2,4", s_qsteps = "1,1.1,1.25,1.45,2", s_targets;
    auto* sweep = app.add_subcommand(
        "rd-sweep", "Measure a (scale, q_step) grid and report the rate-quality "
                    "hull as CSV");
    sweep->add_option("input_file", s_input, "Input point cloud (.ply)")->required();
    sweep->add_option("model_dir", s_model, "Directory with codec.ckpt")->required();
    sweep->add_option("output_csv", s_csv, "Output CSV path")->required();
    sweep->add_option("--scales", s_scales, "Scale grid (default: 1,2,4)");
    sweep->add_option("--q_steps", s_qsteps,
                      "Quantization step grid (default: 1,1.1,1.25,1.45,2)");
    sweep->add_option("--targets", s_targets,
                      "Target bpp list (default: 0.05,0.15,0.5,1.5 geometry / "
                      "0.1,0.3,1,3 with colour)");
    add_compress_flags(sweep, sopts);

    add_helpfull(app);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*compress) return run_compress(with_color, copts, c_input, c_model,
                                           c_output);
        if (*decompress) return run_decompress(with_color, d_input, d_model, d_abu);
        if (*train_cmd)
            return run_train(with_color, t_inputs, t_model, t_width, t_blk, tc,
                             t_minvox);
        if (*train_abu_cmd)
            return run_train_abu(with_color, a_inputs, a_model, a_base, a_stages,
                                 a_sf, a_blk, atc, a_minvox);
        if (*evaluate) return run_evaluate(e_ref, e_test, e_bits);
        if (*sweep)
            return run_rd_sweep(with_color, sopts, s_input, s_model, s_csv,
                                s_scales, s_qsteps, s_targets);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    std::cout << app.help();
    return 0;
}
