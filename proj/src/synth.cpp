#include "vlaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vlaudit/parallel.hpp"

namespace vlaudit::synth {

namespace {

constexpr std::uint64_t kS1Stream = 31;
constexpr std::uint64_t kS2Stream = 32;
constexpr std::uint64_t kLogitStream = 33;
constexpr std::uint64_t kChoiceStream = 34;
constexpr std::uint64_t kSharpStream = 35;
constexpr std::uint64_t kBlurStream = 36;

std::vector<std::vector<double>> gaussian_rows(std::uint64_t seed, std::uint64_t stream, std::size_t n,
                                               std::size_t d, double shift) {
    std::vector<std::vector<double>> rows(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto rng = task_rng(seed, stream, i);
        std::normal_distribution<double> g;
        rows[i].resize(d);
        for (auto& v : rows[i]) v = g(rng);
        rows[i][0] += shift;
    }
    return rows;
}

GrayImage noise_image(std::uint64_t seed, std::uint64_t stream, std::size_t i, std::size_t h, std::size_t w) {
    auto rng = task_rng(seed, stream, i);
    std::uniform_int_distribution<int> u(0, 255);
    GrayImage img(h, w);
    for (auto& p : img.pixels) p = u(rng);
    return img;
}

}  // namespace

void SynthConfig::validate() const {
    if (n == 0) throw ParameterError("n must be >= 1");
    if (dim == 0) throw ParameterError("dim must be >= 1");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ParameterError("delta must be >= 0");
    if (!(signal >= 0.0) || !std::isfinite(signal)) throw ParameterError("signal must be >= 0");
    if (vocab < 2) throw ParameterError("vocab must be >= 2");
    if (length == 0) throw ParameterError("length must be >= 1");
    if (instruction_steps && *instruction_steps > length) throw ParameterError("instruction steps exceed length");
    if (samples_per_image == 0) throw ParameterError("samples_per_image must be >= 1");
    if (height == 0 || width == 0) throw ParameterError("image size must be positive");
}

std::size_t SynthConfig::resolved_instruction_steps() const { return instruction_steps.value_or(length / 4); }

std::string sample_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img%05zu", i);
    return buf;
}

std::pair<EmbeddingSpace, EmbeddingSpace> gen_shifted_embeddings(const SynthConfig& cfg) {
    cfg.validate();
    if (cfg.n < 4) throw ParameterError("embedding fixtures need n >= 4");
    const auto r1 = gaussian_rows(cfg.seed, kS1Stream, cfg.n, cfg.dim, 0.0);
    const auto r2 = gaussian_rows(cfg.seed, kS2Stream, cfg.n, cfg.dim, cfg.delta);
    EmbeddingSpace s1("s1", cfg.dim), s2("s2", cfg.dim);
    char buf[32];
    for (std::size_t i = 0; i < cfg.n; ++i) {
        std::snprintf(buf, sizeof buf, "s1_%05zu", i);
        s1.add(buf, r1[i]);
        std::snprintf(buf, sizeof buf, "s2_%05zu", i);
        s2.add(buf, r2[i]);
    }
    return {std::move(s1), std::move(s2)};
}

std::vector<GenerationTrace> gen_traces(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t images = 2 * cfg.n;
    const std::size_t per = cfg.samples_per_image;
    const std::size_t inst = cfg.resolved_instruction_steps();
    std::vector<GenerationTrace> out(images * per);

#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(images); ++ii) {
        const auto img = static_cast<std::size_t>(ii);
        const bool member = img < cfg.n;
        auto logit_rng = task_rng(cfg.seed, kLogitStream, img);
        std::normal_distribution<double> g;

        // Log-distributions per step, shared by every sample of this image.
        std::vector<std::vector<double>> logprobs(cfg.length, std::vector<double>(cfg.vocab));
        for (auto& lp : logprobs) {
            for (auto& v : lp) v = g(logit_rng);
            if (member) {
                auto top = std::max_element(lp.begin(), lp.end());
                *top *= 1.0 + cfg.signal;
            }
            const double mx = *std::max_element(lp.begin(), lp.end());
            double z = 0.0;
            for (double v : lp) z += std::exp(v - mx);
            const double lse = mx + std::log(z);
            for (auto& v : lp) v -= lse;
        }

        for (std::size_t k = 0; k < per; ++k) {
            const std::size_t t = img * per + k;
            auto rng = task_rng(cfg.seed, kChoiceStream, t);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            GenerationTrace& tr = out[t];
            tr.id = per == 1 ? sample_id(img) : sample_id(img) + "#" + std::to_string(k);
            tr.label = member ? Label::Member : Label::NonMember;
            tr.steps.resize(cfg.length);
            for (std::size_t s = 0; s < cfg.length; ++s) {
                TokenStep& st = tr.steps[s];
                st.mode = StepMode::Full;
                st.segment = s < inst ? Segment::Instruction : Segment::Description;
                st.logprobs = logprobs[s];
                // Inverse-CDF draw; the last token absorbs rounding slack.
                const double r = u(rng);
                double acc = 0.0;
                st.chosen_index = cfg.vocab - 1;
                for (std::size_t v = 0; v < cfg.vocab; ++v) {
                    acc += std::exp(st.logprobs[v]);
                    if (r < acc) {
                        st.chosen_index = v;
                        break;
                    }
                }
                st.chosen_logprob = st.logprobs[st.chosen_index];
                derive_summary(st);
            }
        }
    }
    return out;
}

GrayImage box_blur(const GrayImage& image, std::size_t radius) {
    if (radius == 0) return image;
    const auto h = static_cast<std::ptrdiff_t>(image.height), w = static_cast<std::ptrdiff_t>(image.width);
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const double area = static_cast<double>((2 * r + 1) * (2 * r + 1));
    GrayImage out(image.height, image.width);
    for (std::ptrdiff_t y = 0; y < h; ++y)
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                    const auto yy = std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1);
                    const auto xx = std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1);
                    s += image.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                }
            out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = std::nearbyint(s / area);
        }
    return out;
}

ImageSets gen_images(const SynthConfig& cfg) {
    cfg.validate();
    ImageSets sets;
    sets.sharp.resize(cfg.n);
    sets.blurred.resize(cfg.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(cfg.n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        sets.sharp[i] = noise_image(cfg.seed, kSharpStream, i, cfg.height, cfg.width);
        sets.blurred[i] = box_blur(noise_image(cfg.seed, kBlurStream, i, cfg.height, cfg.width), cfg.blur);
    }
    return sets;
}

}  // namespace vlaudit::synth
