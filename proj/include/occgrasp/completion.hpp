#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "occgrasp/camera.hpp"
#include "occgrasp/scene.hpp"

namespace occgrasp {

/// What a completer may look at besides the partial cloud.
struct CompletionContext {
    const Scene* scene = nullptr;  // ground truth, used only by the oracle
    CameraModel camera;
    Vec3 table_normal = Vec3::UnitZ();
};

struct CompletionResult {
    PointCloud cloud;
    /// Input returned unchanged because the completer could not act on it.
    bool passthrough = false;
    std::string warning;
};

class Completer {
public:
    virtual ~Completer() = default;
    virtual std::string name() const = 0;
    /// Deterministic; non-empty output for non-empty input.
    virtual CompletionResult complete(const PointCloud& partial, const CompletionContext& context) const = 0;
};

/// Surface samples of the true target at its true pose; the partial input is ignored.
PointCloud oracle_completer(const PointCloud& partial, const Scene& scene, int samples = 4096,
                            std::uint64_t seed = 0);

/// Reflects the partial cloud through a vertical plane and unions with the
/// input. The plane normal is the horizontal part of the viewing direction from
/// the camera to the cloud centroid; the plane sits at the middle of the cloud's
/// extent along that normal. Fewer than 4 points pass through with a warning.
CompletionResult mirror_completer(const PointCloud& partial, const Vec3& table_normal, const CameraModel& camera);

class OracleCompleter final : public Completer {
public:
    explicit OracleCompleter(int samples = 4096, std::uint64_t seed = 0) : samples_(samples), seed_(seed) {}
    std::string name() const override { return "oracle"; }
    CompletionResult complete(const PointCloud& partial, const CompletionContext& context) const override;

private:
    int samples_;
    std::uint64_t seed_;
};

class MirrorCompleter final : public Completer {
public:
    std::string name() const override { return "mirror"; }
    CompletionResult complete(const PointCloud& partial, const CompletionContext& context) const override {
        return mirror_completer(partial, context.table_normal, context.camera);
    }
};

/// No completion.
class PassthroughCompleter final : public Completer {
public:
    std::string name() const override { return "passthrough"; }
    CompletionResult complete(const PointCloud& partial, const CompletionContext&) const override {
        return {partial, true, {}};
    }
};

/// "oracle", "mirror" or "passthrough"; InputError otherwise.
std::unique_ptr<Completer> make_completer(const std::string& name);

/// Symmetric mean nearest-neighbour distance,
/// (mean_a d(a, B) + mean_b d(b, A)) / 2. Throws InputError on an empty cloud.
double chamfer_l1(const PointCloud& a, const PointCloud& b);

/// IoU of the voxel sets occupied by a and b on a grid anchored at `origin`.
/// Throws InputError when voxel_size <= 0 or both clouds are empty.
double volumetric_iou(const PointCloud& a, const PointCloud& b, double voxel_size, const Vec3& origin = Vec3::Zero());

struct CompletionRow {
    std::string scene_id;
    int target = 0;
    std::string completer;
    double cd_l1_x1000 = 0.0;
    double iou_pct = 0.0;
    double occlusion_level = 0.0;
};

void write_completion_csv(const std::filesystem::path& path, const std::vector<CompletionRow>& rows);
std::vector<CompletionRow> read_completion_csv(const std::filesystem::path& path);

}  // namespace occgrasp
