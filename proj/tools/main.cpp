// Copyright (c) 2026 the sdfrecon authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, three-stage training,
// rendering, mesh export and mesh evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>

#include "sdfrecon/config.hpp"
#include "sdfrecon/error.hpp"
#include "sdfrecon/metrics.hpp"
#include "sdfrecon/parallel.hpp"
#include "sdfrecon/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sdfrecon;

namespace {

struct CommonFlags {
    int threads = default_threads();
    uint64_t seed = 1;
};

int run_gen(const std::string& scene, const std::string& out_dir, const CommonFlags& common,
            int views, int res) {
    SceneSpec spec = make_scene_spec(scene);
    if (views > 0) spec.cameras.count = views;
    if (res > 0) spec.image_size = res;
    render_dataset(spec, out_dir, common.seed, common.threads);
    std::printf("dataset '%s' written to %s (%d views, %dx%d)\n", scene.c_str(),
                out_dir.c_str(), spec.cameras.count, spec.image_size, spec.image_size);
    return 0;
}

int run_train(const std::string& config_path, const CommonFlags& common,
              const std::string& stages_flag, const std::string& prior_flag,
              const std::string& dataset_flag, const std::string& out_flag,
              double scale_factor_flag, bool seed_set, bool threads_set) {
    KeyValueFile raw = KeyValueFile::parse_file(config_path);
    TrainConfig cfg = TrainConfig::from_file(config_path);
    if (seed_set) cfg.seed = common.seed;
    if (threads_set) cfg.threads = common.threads;
    if (scale_factor_flag > 0.0) cfg.schedule.factor = scale_factor_flag;

    std::string dataset_dir = !dataset_flag.empty() ? dataset_flag : raw.get_or("dataset_dir", "");
    if (dataset_dir.empty()) throw InputError("no dataset_dir in config and no --dataset flag");
    std::string out_dir = !out_flag.empty() ? out_flag : raw.get_or("out_dir", "");
    if (out_dir.empty()) throw InputError("no out_dir in config and no --out flag");
    std::string stages = !stages_flag.empty() ? stages_flag : raw.get_or("stages", "1,2,3");
    std::string prior_name = !prior_flag.empty() ? prior_flag : raw.get_or("prior", "zero");

    bool s1 = false, s2 = false, s3 = false;
    {
        std::string cleaned;
        for (char c : stages)
            if (c != ' ') cleaned += c;
        if (cleaned == "1") s1 = true;
        else if (cleaned == "1,2") s1 = s2 = true;
        else if (cleaned == "1,2,3") s1 = s2 = s3 = true;
        else throw UsageError("--stages must be one of: 1 | 1,2 | 1,2,3");
    }

    Dataset dataset = Dataset::load(dataset_dir);
    cfg.validate();
    auto prior = make_prior(prior_name, dataset, cfg);
    Trainer trainer(std::move(dataset), cfg, prior);
    trainer.run(s1, s2, s3, out_dir);
    std::printf("training complete; checkpoints in %s\n", out_dir.c_str());
    return 0;
}

Image encode_normal_image(const std::vector<RenderBuffers>& buffers, int W, int H,
                          const Mat3& rot) {
    Image img(W, H, 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const RenderBuffers& buf = buffers[static_cast<std::size_t>(y) * W + x];
            double len = length(buf.normal);
            Vec3 n = len > 1e-6 ? rot.transposed_mul(buf.normal / len) : Vec3{0, 0, 0};
            img.at(x, y, 0) = 0.5 * (n.x + 1.0);
            img.at(x, y, 1) = 0.5 * (n.y + 1.0);
            img.at(x, y, 2) = 0.5 * (n.z + 1.0);
        }
    return img;
}

int run_render(const std::string& ckpt_dir, const std::string& out_dir,
               const CommonFlags& common, const std::string& dataset_dir, int view_index,
               int orbit, bool per_object, int samples, bool use_surface) {
    Checkpoint ckpt = Checkpoint::load(ckpt_dir);
    fs::create_directories(out_dir);
    std::vector<PinholeCamera> cameras;
    if (!dataset_dir.empty() && view_index >= 0) {
        Dataset ds = Dataset::load(dataset_dir);
        if (view_index >= static_cast<int>(ds.views.size()))
            throw InputError("--view-index out of range");
        cameras.push_back(ds.views[view_index].camera);
    } else {
        int count = std::max(1, orbit);
        for (int i = 0; i < count; ++i) {
            double az = 2.0 * kPi * i / count;
            Vec3 eye{0.65 * std::sin(az), 0.1, 0.65 * std::cos(az)};
            cameras.push_back(
                PinholeCamera::look_at(eye, {0, -0.15, 0}, {0, 1, 0}, 60.0, 128, 128));
        }
    }

    const DenseGrid3* vis = ckpt.visibility ? &ckpt.visibility->grid() : nullptr;
    for (std::size_t ci = 0; ci < cameras.size(); ++ci) {
        const PinholeCamera& cam = cameras[ci];
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%03zu", ci);
        fs::path base = fs::path(out_dir) / stem;

        RenderOptions opts;
        opts.semantics = true;
        std::vector<RenderBuffers> buffers =
            render_image_buffers(ckpt.model, cam, opts, vis, samples, common.threads);
        const int W = cam.width, H = cam.height;
        Image color(W, H, 3), depth(W, H, 1), visibility(W, H, 1);
        std::vector<int> semantic(static_cast<std::size_t>(W) * H, 1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const RenderBuffers& buf = buffers[static_cast<std::size_t>(y) * W + x];
                color.set_rgb(x, y, buf.color);
                depth.at(x, y) = buf.depth;
                visibility.at(x, y) = buf.visibility;
                int argmax = 0;
                for (int j = 1; j < buf.k; ++j)
                    if (buf.sem[j] > buf.sem[argmax]) argmax = j;
                semantic[static_cast<std::size_t>(y) * W + x] = argmax + 1;
            }
        if (use_surface && ckpt.surface) {
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    Ray ray = cam.pixel_ray(x, y, 0.0, 1e9);
                    if (!clip_ray_to_bounds(ray, ckpt.model.bounds)) continue;
                    color.set_rgb(x, y, surface_color(ckpt.model, *ckpt.surface, ray));
                }
        }
        write_png(base.string() + "_color.png", color);
        write_pfm(base.string() + "_depth.pfm", depth);
        write_png(base.string() + "_normal.png", encode_normal_image(buffers, W, H, cam.rotation));
        write_label_png(base.string() + "_semantic.png", semantic, W, H);
        if (vis) write_pfm(base.string() + "_visibility.pfm", visibility);

        if (per_object) {
            for (int id = 1; id <= ckpt.model.object_count(); ++id) {
                RenderOptions oopts;
                oopts.object_id = id;
                oopts.want_color = false;
                std::vector<RenderBuffers> obuf = render_image_buffers(
                    ckpt.model, cam, oopts, nullptr, samples, common.threads);
                Image mask(W, H, 1);
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        mask.at(x, y) = obuf[static_cast<std::size_t>(y) * W + x].mask;
                char oname[64];
                std::snprintf(oname, sizeof(oname), "_obj_%02d_mask.png", id);
                write_png(base.string() + oname, mask);
                std::snprintf(oname, sizeof(oname), "_obj_%02d_normal.png", id);
                write_png(base.string() + oname, encode_normal_image(obuf, W, H, cam.rotation));
            }
        }
    }
    std::printf("rendered %zu view(s) into %s\n", cameras.size(), out_dir.c_str());
    return 0;
}

int run_mesh(const std::string& ckpt_dir, const std::string& out_dir, int resolution,
             const std::string& format) {
    Checkpoint ckpt = Checkpoint::load(ckpt_dir);
    fs::create_directories(out_dir);
    int written = 0;
    for (int id = 1; id <= ckpt.model.object_count(); ++id) {
        TriangleMesh mesh =
            extract_isosurface(ckpt.model.object_by_id(id).field, resolution, ckpt.model.bounds);
        if (mesh.empty()) {
            std::fprintf(stderr, "warning: object %d (%s) has no surface; skipping\n", id,
                         ckpt.model.object_by_id(id).name.c_str());
            continue;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "object_%02d.%s", id, format.c_str());
        fs::path path = fs::path(out_dir) / name;
        if (format == "ply") write_ply(path.string(), mesh);
        else write_obj(path.string(), mesh);
        ++written;
    }
    std::printf("wrote %d mesh file(s) to %s\n", written, out_dir.c_str());
    return 0;
}

int run_eval(const std::string& pred_dir, const std::string& gt_dir, const CommonFlags& common,
             int points, double threshold, const std::string& out_file) {
    std::vector<fs::path> pred_meshes;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.path().extension() == ".ply") pred_meshes.push_back(entry.path());
    std::sort(pred_meshes.begin(), pred_meshes.end());
    if (pred_meshes.empty()) throw InputError("no .ply meshes in " + pred_dir);

    MetricsReport report;
    PointCloud scene_pred, scene_gt;
    Rng rng(common.seed);
    for (const fs::path& pred_path : pred_meshes) {
        fs::path gt_path = fs::path(gt_dir) / pred_path.filename();
        if (!fs::exists(gt_path))
            throw InputError("missing ground-truth mesh: " + gt_path.string());
        TriangleMesh pred = read_ply(pred_path.string());
        TriangleMesh gt = read_ply(gt_path.string());
        PointCloud pc = sample_points(pred, points, rng);
        PointCloud gc = sample_points(gt, points, rng);
        ObjectMetrics metrics;
        metrics.name = pred_path.stem().string();
        ChamferResult cr = chamfer_fscore(pc, gc, threshold);
        metrics.chamfer = cr.chamfer;
        metrics.f_score = cr.f_score;
        metrics.normal_consistency = normal_consistency(pc, gc);
        report.per_object.push_back(metrics);
        scene_pred.points.insert(scene_pred.points.end(), pc.points.begin(), pc.points.end());
        scene_pred.normals.insert(scene_pred.normals.end(), pc.normals.begin(),
                                  pc.normals.end());
        scene_gt.points.insert(scene_gt.points.end(), gc.points.begin(), gc.points.end());
        scene_gt.normals.insert(scene_gt.normals.end(), gc.normals.begin(), gc.normals.end());
    }
    ChamferResult scene_cr = chamfer_fscore(scene_pred, scene_gt, threshold);
    report.scene.name = "scene";
    report.scene.chamfer = scene_cr.chamfer;
    report.scene.f_score = scene_cr.f_score;
    report.scene.normal_consistency = normal_consistency(scene_pred, scene_gt);

    std::fputs(report.to_text().c_str(), stdout);
    if (!out_file.empty()) report.save(out_file);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decompositional SDF scene reconstruction"};
    app.require_subcommand(1);
    app.fallthrough();
    CommonFlags common;
    bool seed_set = false, threads_set = false;
    app.add_option("--seed", common.seed, "global RNG seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--threads", common.threads, "worker thread cap")
        ->each([&](const std::string&) { threads_set = true; });

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->fallthrough();
    std::string gen_scene, gen_out;
    int gen_views = 0, gen_res = 0;
    gen->add_option("scene", gen_scene, "scene name")->required();
    gen->add_option("out_dir", gen_out, "output directory")->required();
    gen->add_option("--views", gen_views, "number of input views");
    gen->add_option("--res", gen_res, "image resolution");

    auto* train = app.add_subcommand("train", "run the three-stage optimization");
    train->fallthrough();
    std::string train_config, train_stages, train_prior, train_dataset, train_out;
    double train_scale = 0.0;
    train->add_option("config", train_config, "key=value config file")->required();
    train->add_option("--stages", train_stages, "1 | 1,2 | 1,2,3");
    train->add_option("--prior", train_prior, "zero | mock:gt | file:<dir>");
    train->add_option("--dataset", train_dataset, "dataset directory (overrides config)");
    train->add_option("--out", train_out, "output directory (overrides config)");
    train->add_option("--scale-factor", train_scale, "iteration scale factor");

    auto* render = app.add_subcommand("render", "render images from a checkpoint");
    render->fallthrough();
    std::string render_ckpt, render_out, render_dataset_dir;
    int render_view = -1, render_orbit = 1, render_samples = 128;
    bool render_per_object = false, render_surface = false;
    render->add_option("checkpoint", render_ckpt, "checkpoint directory")->required();
    render->add_option("--out", render_out, "output directory")->required();
    render->add_option("--dataset", render_dataset_dir, "dataset for input-view cameras");
    render->add_option("--view-index", render_view, "input view index to reproduce");
    render->add_option("--orbit", render_orbit, "number of orbit cameras");
    render->add_option("--samples", render_samples, "samples per ray");
    render->add_flag("--per-object", render_per_object, "emit per-object masks and normals");
    render->add_flag("--surface", render_surface, "color via the stage-3 surface model");

    auto* mesh = app.add_subcommand("mesh", "export per-object meshes");
    mesh->fallthrough();
    std::string mesh_ckpt, mesh_out, mesh_format = "ply";
    int mesh_res = 128;
    mesh->add_option("checkpoint", mesh_ckpt, "checkpoint directory")->required();
    mesh->add_option("--out", mesh_out, "output directory")->required();
    mesh->add_option("--resolution", mesh_res, "extraction lattice resolution");
    mesh->add_option("--format", mesh_format, "ply | obj")->check(CLI::IsMember({"ply", "obj"}));

    auto* eval = app.add_subcommand("eval", "evaluate predicted meshes against ground truth");
    eval->fallthrough();
    std::string eval_pred, eval_gt, eval_out;
    int eval_points = 100000;
    double eval_threshold = 0.05;
    eval->add_option("pred_dir", eval_pred, "predicted mesh directory")->required();
    eval->add_option("gt_dir", eval_gt, "ground-truth mesh directory")->required();
    eval->add_option("--points", eval_points, "samples per mesh");
    eval->add_option("--threshold", eval_threshold, "F-score distance threshold");
    eval->add_option("--out", eval_out, "write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return run_gen(gen_scene, gen_out, common, gen_views, gen_res);
        if (train->parsed())
            return run_train(train_config, common, train_stages, train_prior, train_dataset,
                             train_out, train_scale, seed_set, threads_set);
        if (render->parsed())
            return run_render(render_ckpt, render_out, common, render_dataset_dir, render_view,
                              render_orbit, render_per_object, render_samples, render_surface);
        if (mesh->parsed()) return run_mesh(mesh_ckpt, mesh_out, mesh_res, mesh_format);
        if (eval->parsed())
            return run_eval(eval_pred, eval_gt, common, eval_points, eval_threshold, eval_out);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
