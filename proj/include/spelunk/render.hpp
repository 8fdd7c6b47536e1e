#ifndef SPELUNK_RENDER_HPP
#define SPELUNK_RENDER_HPP

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "spelunk/camera.hpp"
#include "spelunk/error.hpp"
#include "spelunk/frustum.hpp"
#include "spelunk/network.hpp"
#include "spelunk/parallel.hpp"
#include "spelunk/ray.hpp"

namespace spelunk {

/// RGB8, row-major, top-left origin.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(3) * w * h, 0) {}

    std::uint8_t* pixel(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t* pixel(int x, int y) const {
        return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* p = pixel(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

struct RenderMode {
    enum class Kind { PerRay, Frustum, FixedStep };
    Kind kind = Kind::PerRay;
    double step = 0.0;  // FixedStep only

    static RenderMode per_ray() { return {Kind::PerRay, 0.0}; }
    static RenderMode frustum() { return {Kind::Frustum, 0.0}; }
    static RenderMode fixed_step(double h) {
        if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidParameter, "fixed step must be positive");
        return {Kind::FixedStep, h};
    }

    /// "per_ray", "frustum", "fixed_step" (h = 0.01) or "fixed_step:<h>".
    static RenderMode parse(const std::string& s) {
        if (s == "per_ray") return per_ray();
        if (s == "frustum") return frustum();
        if (s == "fixed_step") return fixed_step(0.01);
        if (s.rfind("fixed_step:", 0) == 0) {
            try {
                return fixed_step(std::stod(s.substr(11)));
            } catch (const std::logic_error&) {
            }
        }
        throw Error(ErrorCode::InvalidParameter, "unknown render mode '" + s + "'");
    }
};

struct ShadingOptions {
    Vec3 light = Vec3(-0.4, 0.7, 0.6).normalized();  // direction towards the light
    std::array<std::uint8_t, 3> surface{235, 225, 205};
    std::array<std::uint8_t, 3> background{32, 36, 48};
};

struct RenderStats {
    long hits = 0;
    long steps = 0;
    std::vector<HitResult> pixels;  // row-major, t before refinement
};

namespace detail {

/// Normalized central-difference gradient of f at p.
inline Vec3 fd_normal(const NetworkSpec& net, const Vec3& p, double h) {
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = h;
        g[a] = eval_scalar(net, p + e) - eval_scalar(net, p - e);
    }
    const double n = g.norm();
    return n > 0.0 ? Vec3(g / n) : Vec3::Zero();
}

/// The fixed-step baseline: samples t = 0, h, 2h, ... and reports the last
/// sample before the first sign flip. Thin features between samples are missed.
inline HitResult march_fixed(const NetworkSpec& net, const Ray& ray, double h, double t_max) {
    const double f0 = eval_scalar(net, ray.origin);
    if (f0 == 0.0) return HitResult::at(0.0, 0);
    long steps = 0;
    for (long i = 1;; ++i) {
        const double t = static_cast<double>(i) * h;
        if (t > t_max) return HitResult::miss(steps);
        ++steps;
        if (different_signs(f0, eval_scalar(net, ray.at(t)))) return HitResult::at(static_cast<double>(i - 1) * h, steps);
    }
}

} // namespace detail

/// Ray casts every pixel and applies Lambert shading at the bisection-refined
/// hit point. Misses get the background color.
inline Image render_image(const NetworkSpec& net, const Camera& camera, const RayCastParams& params,
                          const CondensationPolicy& policy, const RenderMode& mode, const ShadingOptions& shading = {},
                          RenderStats* stats = nullptr) {
    camera.validate();
    params.validate();
    if (net.input_dim() != 3) throw Error(ErrorCode::DimensionMismatch, "rendering needs a 3d network");
    const int w = camera.width, h = camera.height;
    std::vector<HitResult> hits(static_cast<std::size_t>(w) * h);
    long steps = 0;
    switch (mode.kind) {
        case RenderMode::Kind::Frustum: {
            auto res = cast_frustum_image(net, camera, params, policy);
            hits = std::move(res.hits);
            steps = res.total_steps();
            break;
        }
        case RenderMode::Kind::PerRay:
        case RenderMode::Kind::FixedStep: {
            parallel_for(static_cast<std::size_t>(h), [&](std::size_t y) {
                for (int x = 0; x < w; ++x) {
                    const Ray r = camera.ray(x, static_cast<int>(y));
                    hits[y * w + x] = mode.kind == RenderMode::Kind::PerRay
                                          ? cast_ray(net, r, params, policy)
                                          : detail::march_fixed(net, r, mode.step, params.t_max);
                }
            });
            for (const auto& hit : hits) steps += hit.steps;
            break;
        }
    }

    const double bracket = mode.kind == RenderMode::Kind::FixedStep ? mode.step : params.delta;
    const double fd = params.delta / 10.0;
    Image img(w, h);
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t y) {
        for (int x = 0; x < w; ++x) {
            const auto& hit = hits[y * w + x];
            const auto& bg = shading.background;
            if (!hit.hit) {
                img.set(x, static_cast<int>(y), bg[0], bg[1], bg[2]);
                continue;
            }
            const Ray r = camera.ray(x, static_cast<int>(y));
            const Vec3 p = r.at(refine_hit(net, r, hit, bracket));
            const double lambert = std::max(0.0, detail::fd_normal(net, p, fd).dot(shading.light));
            auto channel = [&](int c) {
                return static_cast<std::uint8_t>(std::lround(lambert * shading.surface[c]));
            };
            img.set(x, static_cast<int>(y), channel(0), channel(1), channel(2));
        }
    });
    if (stats) {
        stats->steps = steps;
        stats->hits = 0;
        for (const auto& hit : hits) stats->hits += hit.hit;
        stats->pixels = std::move(hits);
    }
    return img;
}

enum class ImageFormat { PPM, PNG };

/// PNG when the path ends in ".png", PPM otherwise.
inline ImageFormat format_for_path(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return ImageFormat::PPM;
    std::string ext = path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == "png" ? ImageFormat::PNG : ImageFormat::PPM;
}

namespace detail {

inline void check_image(const Image& img) {
    if (img.width < 1 || img.height < 1) throw Error(ErrorCode::IOError, "InvalidImage: empty image");
    if (img.rgb.size() != static_cast<std::size_t>(3) * img.width * img.height) {
        throw Error(ErrorCode::IOError, "InvalidImage: buffer size does not match dimensions");
    }
}

inline void write_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IOError, "cannot open " + path);
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (!out.flush()) throw Error(ErrorCode::IOError, "failed writing " + path);
}

inline void write_png(const Image& img, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw Error(ErrorCode::IOError, "cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        std::fclose(f);
        throw Error(ErrorCode::IOError, "libpng initialization failed");
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[y] = const_cast<png_bytep>(img.pixel(0, y));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(f);
        throw Error(ErrorCode::IOError, "failed writing " + path);
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fclose(f) != 0) throw Error(ErrorCode::IOError, "failed closing " + path);
}

} // namespace detail

inline void write_image(const Image& img, const std::string& path, ImageFormat format) {
    detail::check_image(img);
    if (format == ImageFormat::PNG) {
        detail::write_png(img, path);
    } else {
        detail::write_ppm(img, path);
    }
}

inline void write_image(const Image& img, const std::string& path) { write_image(img, path, format_for_path(path)); }

/// Reads the binary P6 files written above (maxval 255, no comments).
inline Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IOError, "cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w < 1 || h < 1 || maxval != 255 || in.get() != '\n') {
        throw Error(ErrorCode::IOError, "unsupported PPM header in " + path);
    }
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw Error(ErrorCode::IOError, "truncated PPM");
    return img;
}

} // namespace spelunk

#endif
