#pragma once

#include "trajseg/data/scene.hpp"
#include "trajseg/io/config.hpp"
#include "trajseg/model/layers.hpp"

namespace trajseg {

/// Constant network inputs derived from one RGB frame.
template <typename S>
struct FrameInput {
    Mat<S> patches;  // (H/p * W/p) x (3 p^2), patches in row-major grid order
    Mat<S> pixels;   // (H * W) x 3
    int height = 0;
    int width = 0;
    int patch = 0;

    [[nodiscard]] int grid_h() const { return height / patch; }
    [[nodiscard]] int grid_w() const { return width / patch; }
};

template <typename S>
FrameInput<S> make_frame_input(const RgbImage& img, int patch) {
    if (img.height % patch != 0 || img.width % patch != 0) {
        throw ShapeError("frame size must be a multiple of the patch size");
    }
    FrameInput<S> in;
    in.height = img.height;
    in.width = img.width;
    in.patch = patch;
    const int gh = img.height / patch;
    const int gw = img.width / patch;
    in.patches.resize(gh * gw, 3 * patch * patch);
    in.pixels.resize(img.height * img.width, 3);
    auto norm = [](std::uint8_t v) { return static_cast<S>(v) / S(255) - S(0.5); };
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* p = img.pixel(y, x);
            const int row = (y / patch) * gw + (x / patch);
            const int col = ((y % patch) * patch + (x % patch)) * 3;
            for (int c = 0; c < 3; ++c) {
                in.patches(row, col + c) = norm(p[c]);
                in.pixels(y * img.width + x, c) = norm(p[c]);
            }
        }
    }
    return in;
}

/// Per-frame features: patch grid f_t and full-resolution skip features.
template <typename S>
struct FrameFeatures {
    Var<S> patches;  // n x C, n = grid_h * grid_w
    Var<S> pixels;   // (H*W) x pixel_channels; invalid when the skip is disabled
    int grid_h = 0;
    int grid_w = 0;
    int patch = 0;
};

/// Patch embedding with learned positions and one residual MLP, plus a
/// per-pixel color embedding for the decoder's full-resolution path.
class VisionEncoder {
public:
    VisionEncoder() = default;

    template <typename S>
    VisionEncoder(ParamInit<S> init, const RunConfig& cfg)
        : pixel_skip_(cfg.pixel_skip) {
        const int n = (cfg.height / cfg.patch) * (cfg.width / cfg.patch);
        embed_ = Linear::create(init, "embed", 3 * cfg.patch * cfg.patch, cfg.channels);
        pos_ = init.normal("pos", n, cfg.channels, 0.5);
        norm_ = LayerNorm::create(init, "norm", cfg.channels);
        mlp1_ = Linear::create(init, "mlp1", cfg.channels, cfg.channels);
        mlp2_ = Linear::create(init, "mlp2", cfg.channels, cfg.channels, true, 0.5);
        if (pixel_skip_) pixel_ = Linear::create(init, "pixel", 3, cfg.pixel_channels, true, 2.0);
    }

    template <typename S>
    FrameFeatures<S> encode(Graph<S>& g, const FrameInput<S>& in) const {
        FrameFeatures<S> f;
        f.grid_h = in.grid_h();
        f.grid_w = in.grid_w();
        f.patch = in.patch;
        Var<S> x = ops::add(embed_(g, g.constant(in.patches)), g.param(pos_));
        x = ops::add(x, mlp2_(g, ops::gelu(mlp1_(g, norm_(g, x)))));
        f.patches = x;
        if (pixel_skip_) f.pixels = ops::gelu(pixel_(g, g.constant(in.pixels)));
        return f;
    }

private:
    bool pixel_skip_ = true;
    Linear embed_;
    std::size_t pos_ = 0;
    LayerNorm norm_;
    Linear mlp1_, mlp2_;
    Linear pixel_;
};

}  // namespace trajseg
