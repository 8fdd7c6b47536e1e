// spelunk: command-line front end for the geometric queries.
//
// Exit codes: 0 success, 1 runtime error (or fuzz violations), 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spelunk/spelunk.hpp"

using namespace spelunk;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw UsageError("bad number '" + item + "' in " + what);
        }
    }
    return out;
}

Vec3 parse_vec3(const std::string& s, const std::string& what) {
    const auto v = parse_list(s, what);
    if (v.size() != 3) throw UsageError(what + " needs three comma-separated values");
    return {v[0], v[1], v[2]};
}

/// "lo,hi" for a cube or "x0,y0,z0,x1,y1,z1".
AABB parse_bounds(const std::string& s, int d) {
    const auto v = parse_list(s, "--bounds");
    if (v.size() == 2) return AABB::cube(d, v[0], v[1]);
    if (static_cast<int>(v.size()) == 2 * d) {
        Vector lo(d), hi(d);
        for (int i = 0; i < d; ++i) {
            lo[i] = v[i];
            hi[i] = v[d + i];
        }
        return {lo, hi};
    }
    throw UsageError("--bounds needs 2 or " + std::to_string(2 * d) + " values");
}

std::pair<int, int> parse_res(const std::string& s) {
    const auto x = s.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        std::size_t a = 0, b = 0;
        const int w = std::stoi(s.substr(0, x), &a);
        const int h = std::stoi(s.substr(x + 1), &b);
        if (a != x || b != s.size() - x - 1) throw std::invalid_argument(s);
        return {w, h};
    } catch (const std::logic_error&) {
        throw UsageError("--res must look like 256x256");
    }
}

CondensationPolicy policy_or(const std::string& s, const CondensationPolicy& fallback) {
    if (s.empty()) return fallback;
    try {
        return parse_policy(s);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::vector<NetworkSpec> load_many(const std::vector<std::string>& files, const std::string& dir) {
    std::vector<std::string> paths = files;
    if (!dir.empty()) {
        std::vector<std::string> found;
        std::error_code ec;
        for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
            if (entry.path().extension() == ".json") found.push_back(entry.path().string());
        }
        if (ec) throw Error(ErrorCode::IOError, "cannot list " + dir);
        std::sort(found.begin(), found.end());
        paths.insert(paths.end(), found.begin(), found.end());
    }
    std::vector<NetworkSpec> nets;
    for (const auto& p : paths) nets.push_back(load_network(p));
    return nets;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out || !(out << text) || !out.flush()) throw Error(ErrorCode::IOError, "cannot write " + path);
}

// Flags shared by the query subcommands.
struct Common {
    std::string weights;
    std::string policy;
    double delta = 1e-3;
    int threads = 0;
    std::uint64_t seed = 0;
    std::string bounds = "-1,1";

    void add(CLI::App* app, bool need_weights = true, bool with_bounds = true) {
        auto* w = app->add_option("--weights", weights, "network weight file (JSON)");
        if (need_weights) w->required();
        app->add_option("--policy", policy,
                        "range analysis: interval, affine-fixed, affine-full, affine-truncate:N");
        app->add_option("--delta", delta, "convergence tolerance")->capture_default_str();
        app->add_option("--threads", threads, "worker threads (0 = all cores; SPELUNK_THREADS overrides)");
        app->add_option("--seed", seed, "random seed")->capture_default_str();
        if (with_bounds) {
            app->add_option("--bounds", bounds, "domain: lo,hi for a cube or x0,y0,z0,x1,y1,z1")
                ->capture_default_str();
        }
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Guaranteed geometric queries on neural implicit surfaces"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    // render
    Common render_c;
    std::string render_res = "256x256", render_out, render_mode = "frustum", cam_pos = "0,0,3", cam_at = "0,0,0",
                cam_up = "0,1,0";
    double fov = 45.0, t_max = 10.0;
    auto* render = app.add_subcommand("render", "ray cast an image (PPM or PNG by extension)");
    render_c.add(render, true, false);
    render->add_option("--res", render_res, "resolution WxH")->capture_default_str();
    render->add_option("--out", render_out, "output image path")->required();
    render->add_option("--mode", render_mode, "per_ray, frustum, fixed_step or fixed_step:H")->capture_default_str();
    render->add_option("--camera", cam_pos, "camera position x,y,z")->capture_default_str();
    render->add_option("--look-at", cam_at, "look-at point x,y,z")->capture_default_str();
    render->add_option("--up", cam_up, "up vector x,y,z")->capture_default_str();
    render->add_option("--fov", fov, "vertical field of view in degrees")->capture_default_str();
    render->add_option("--t-max", t_max, "maximum ray length")->capture_default_str();

    // mesh
    Common mesh_c;
    int depth_exp = 6, dense_levels = 3;
    bool mesh_dense = false;
    std::string mesh_out;
    auto* mesh = app.add_subcommand("mesh", "extract a triangle mesh of the zero level set (OBJ)");
    mesh_c.add(mesh);
    mesh->add_option("--depth-exp", depth_exp, "grid has 2^m cells per axis")->capture_default_str();
    mesh->add_option("--dense-levels", dense_levels, "k-d levels extracted densely at the bottom of the tree")
        ->capture_default_str();
    mesh->add_flag("--dense", mesh_dense, "plain marching cubes over the full grid");
    mesh->add_option("--out", mesh_out, "output OBJ path")->required();

    // sample
    Common sample_c;
    long n_samples = 10000;
    double band = 0.01;
    int sample_depth = 15;
    bool naive = false;
    std::string sample_out;
    auto* sample = app.add_subcommand("sample", "sample points with |f| < band");
    sample_c.add(sample);
    sample->add_option("--n", n_samples, "number of samples")->capture_default_str();
    sample->add_option("--band", band, "band half-width r")->capture_default_str();
    sample->add_option("--depth", sample_depth, "tree depth")->capture_default_str();
    sample->add_flag("--naive", naive, "rejection sampling over the whole domain");
    sample->add_option("--out", sample_out, "output CSV of points (x,y,z per line)");

    // mass
    Common mass_c;
    int mass_depth = 18, per_leaf = 64;
    auto* mass = app.add_subcommand("mass", "mass, centroid and inertia of the solid f < 0");
    mass_c.add(mass);
    mass->add_option("--depth", mass_depth, "tree depth")->capture_default_str();
    mass->add_option("--samples-per-leaf", per_leaf, "Monte-Carlo samples per undecided leaf")->capture_default_str();

    // intersect
    Common isect_c;
    std::string weights_b;
    auto* isect = app.add_subcommand("intersect", "test whether two solids overlap");
    isect_c.add(isect);
    isect->add_option("--weights-b", weights_b, "second network")->required();

    // closest
    Common closest_c;
    std::string query;
    auto* closest = app.add_subcommand("closest", "closest surface point to a query");
    closest_c.add(closest);
    closest->add_option("--point", query, "query point x,y,z")->required();

    // wos
    Common wos_c;
    std::string wos_point, boundary = "x";
    long walks = 10000;
    auto* wos = app.add_subcommand("wos", "walk-on-spheres estimate of a harmonic function");
    wos_c.add(wos, true, false);
    wos->add_option("--point", wos_point, "query point x,y,z")->required();
    wos->add_option("--walks", walks, "number of walks")->capture_default_str();
    wos->add_option("--boundary", boundary, "boundary data: x, y, z or const:C")->capture_default_str();

    // bench
    Common bench_c;
    std::vector<std::string> bench_weights;
    std::string bench_dir, bench_out;
    BenchOptions bench_o;
    auto* bench = app.add_subcommand("bench", "compare range analysis variants (CSV report)");
    bench->add_option("--weights", bench_weights, "network files")->take_all();
    bench->add_option("--weights-dir", bench_dir, "directory of network files");
    bench->add_option("--regions", bench_o.n_regions, "random regions per network and dimension")
        ->capture_default_str();
    bench->add_option("--timing-regions", bench_o.timing_regions, "regions per timing run")->capture_default_str();
    bench->add_option("--raycast-res", bench_o.raycast_res, "raycast view is NxN (0 skips)")->capture_default_str();
    bench->add_option("--out", bench_out, "output CSV path")->required();
    bench->add_option("--threads", bench_c.threads, "worker threads");
    bench->add_option("--seed", bench_o.seed, "random seed")->capture_default_str();

    // fuzz
    Common fuzz_c;
    std::vector<std::string> fuzz_weights;
    std::string fuzz_dir;
    FuzzOptions fuzz_o;
    auto* fuzz = app.add_subcommand("fuzz", "check range bounds against point samples");
    fuzz->add_option("--weights", fuzz_weights, "network files")->take_all();
    fuzz->add_option("--weights-dir", fuzz_dir, "directory of network files");
    fuzz->add_option("--regions", fuzz_o.n_regions, "random regions in total")->capture_default_str();
    fuzz->add_option("--samples", fuzz_o.samples, "point samples per region")->capture_default_str();
    fuzz->add_option("--threads", fuzz_c.threads, "worker threads");
    fuzz->add_option("--seed", fuzz_o.seed, "random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const CLI::App* cmd = app.get_subcommands().front();
    Common* common = nullptr;
    const std::string name = cmd->get_name();
    if (name == "render") common = &render_c;
    if (name == "mesh") common = &mesh_c;
    if (name == "sample") common = &sample_c;
    if (name == "mass") common = &mass_c;
    if (name == "intersect") common = &isect_c;
    if (name == "closest") common = &closest_c;
    if (name == "wos") common = &wos_c;
    if (name == "bench") common = &bench_c;
    if (name == "fuzz") common = &fuzz_c;

    int threads = common->threads;
    if (const char* env = std::getenv("SPELUNK_THREADS")) {
        try {
            threads = std::stoi(env);
        } catch (const std::logic_error&) {
            throw UsageError("SPELUNK_THREADS must be an integer");
        }
    }
    if (threads < 0) throw UsageError("thread count must be >= 0");
    set_max_threads(threads);

    // ray queries default to affine-fixed, volumetric ones to affine-full
    const auto ray_policy = policy_or(common->policy, CondensationPolicy::fixed());
    const auto volume_policy = policy_or(common->policy, CondensationPolicy::full());

    json report;
    report["command"] = name;
    if (name == "render") {
        const NetworkSpec net = load_network(render_c.weights);
        Camera cam;
        std::tie(cam.width, cam.height) = parse_res(render_res);
        cam.position = parse_vec3(cam_pos, "--camera");
        cam.look_at = parse_vec3(cam_at, "--look-at");
        cam.up = parse_vec3(cam_up, "--up");
        cam.vertical_fov = fov;
        RayCastParams params;
        params.delta = render_c.delta;
        params.t_max = t_max;
        RenderMode mode;
        try {
            mode = RenderMode::parse(render_mode);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        RenderStats stats;
        const Image img = render_image(net, cam, params, ray_policy, mode, {}, &stats);
        write_image(img, render_out);
        report["policy"] = to_string(ray_policy);
        report["hits"] = stats.hits;
        report["steps"] = stats.steps;
        report["out"] = render_out;
    } else if (name == "mesh") {
        const NetworkSpec net = load_network(mesh_c.weights);
        const AABB bounds = parse_bounds(mesh_c.bounds, net.input_dim());
        MeshStats stats;
        const TriangleMesh m = mesh_dense ? extract_mesh_dense(net, bounds, depth_exp, &stats)
                                          : extract_mesh(net, bounds, depth_exp, dense_levels, volume_policy, &stats);
        write_obj(m, mesh_out);
        report["policy"] = mesh_dense ? "dense" : to_string(volume_policy);
        report["vertices"] = m.vertices.size();
        report["triangles"] = m.triangles.size();
        report["evaluations"] = stats.evaluations;
        report["range_bound_calls"] = stats.range_bound_calls;
        report["blocks"] = stats.blocks_extracted;
        report["out"] = mesh_out;
    } else if (name == "sample") {
        const NetworkSpec net = load_network(sample_c.weights);
        const AABB bounds = parse_bounds(sample_c.bounds, net.input_dim());
        const SampleResult res =
            naive ? sample_near_surface_naive(net, bounds, n_samples, band, sample_c.seed)
                  : sample_near_surface(net, bounds, n_samples, band, sample_depth, volume_policy, sample_c.seed);
        if (!sample_out.empty()) {
            std::ostringstream out;
            out.precision(17);
            for (const auto& p : res.points) {
                for (Eigen::Index i = 0; i < p.size(); ++i) out << (i ? "," : "") << p[i];
                out << '\n';
            }
            write_text(sample_out, out.str());
        }
        report["samples"] = res.points.size();
        report["evaluations"] = res.evaluations;
        report["range_bound_calls"] = res.range_bound_calls;
        report["kept_nodes"] = res.kept_nodes.size();
    } else if (name == "mass") {
        const NetworkSpec net = load_network(mass_c.weights);
        const AABB bounds = parse_bounds(mass_c.bounds, net.input_dim());
        const BulkProperties b = bulk_properties(net, bounds, mass_depth, per_leaf, mass_c.seed, volume_policy);
        report["policy"] = to_string(volume_policy);
        report["mass"] = b.mass;
        report["mass_error_bound"] = b.mass_error_bound;
        report["centroid"] = vec_json(Vector(b.centroid));
        json inertia = json::array();
        for (int i = 0; i < 3; ++i) inertia.push_back(vec_json(Vector(b.inertia.row(i).transpose())));
        report["inertia"] = inertia;
        report["range_bound_calls"] = b.range_bound_calls;
        report["evaluations"] = b.evaluations;
    } else if (name == "intersect") {
        const NetworkSpec a = load_network(isect_c.weights);
        const NetworkSpec b = load_network(weights_b);
        const AABB bounds = parse_bounds(isect_c.bounds, a.input_dim());
        const auto res = test_intersection(a, b, bounds, isect_c.delta, volume_policy);
        report["result"] = std::string(to_string(res.kind));
        if (res.kind == IntersectionResult::Kind::Intersecting) {
            report["witness"] = {{"lo", vec_json(res.witness.lo)}, {"hi", vec_json(res.witness.hi)}};
        }
        report["inconclusive_nodes"] = res.inconclusive_count;
        report["range_bound_calls"] = res.range_bound_calls;
    } else if (name == "closest") {
        const NetworkSpec net = load_network(closest_c.weights);
        const AABB bounds = parse_bounds(closest_c.bounds, net.input_dim());
        const Vector q = Vector(parse_vec3(query, "--point"));
        const auto res = closest_point(net, q, bounds, closest_c.delta, ray_policy);
        report["point"] = vec_json(res.point);
        report["distance"] = res.distance;
        report["nodes_visited"] = res.nodes_visited;
    } else if (name == "wos") {
        const NetworkSpec net = load_network(wos_c.weights);
        std::function<double(const Vector&)> g;
        if (boundary == "x" || boundary == "y" || boundary == "z") {
            const int axis = boundary[0] - 'x';
            g = [axis](const Vector& p) { return p[axis]; };
        } else if (boundary.rfind("const:", 0) == 0) {
            const double c = parse_list(boundary.substr(6), "--boundary").at(0);
            g = [c](const Vector&) { return c; };
        } else {
            throw UsageError("--boundary must be x, y, z or const:C");
        }
        WalkOnSpheresOptions opts;
        opts.delta = wos_c.delta;
        opts.policy = ray_policy;
        const auto res = walk_on_spheres(net, Vector(parse_vec3(wos_point, "--point")), g, walks, wos_c.seed, opts);
        report["estimate"] = res.estimate;
        report["standard_error"] = res.standard_error;
        report["walks"] = res.n_walks;
        report["total_steps"] = res.total_steps;
    } else if (name == "bench") {
        const auto nets = load_many(bench_weights, bench_dir);
        const auto rows = bench_variants(nets, bench_o);
        write_text(bench_out, bench_csv(rows));
        std::cout << bench_csv(rows);
        return 0;
    } else if (name == "fuzz") {
        const auto nets = load_many(fuzz_weights, fuzz_dir);
        const auto rep = fuzz_soundness(nets, fuzz_o);
        std::cout << format_report(rep);
        return rep.passed() ? 0 : 1;
    }
    std::cout << report.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
