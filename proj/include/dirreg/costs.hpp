#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dirreg/geometry.hpp"
#include "dirreg/kernels.hpp"
#include "dirreg/transforms.hpp"

namespace dirreg {

enum class CostFamily { cx, cx_delta, cu, cu_delta, cxu, cxu_delta };
enum class CostMode { full, rigid_scalar_product };

CostFamily cost_family_from_string(const std::string& name);
std::string to_string(CostFamily family);
bool family_needs_normals(CostFamily family);

// One-to-one index pairs linking model to target points, with the local/global
// mixing weight that produced them.
struct CorrespondenceSet {
  std::vector<std::pair<int, int>> pairs;
  double alpha = 1.0;
};

struct CostSpec {
  CostFamily family = CostFamily::cxu;
  CostMode mode = CostMode::full;
  KernelParams kernel;
  std::optional<CorrespondenceSet> correspondences;

  void validate(const Transform& t) const;
};

// All costs are minimization objectives; rigid scalar-product mode returns the
// negated cross term (normalizing constants kept so values stay finite).

double cost_x(const OrientedPointSet& model, const OrientedPointSet& target,
              const KernelParams& k, const CorrespondenceSet* corr = nullptr);

double cost_u(const OrientedPointSet& model, const OrientedPointSet& target,
              const KernelParams& k, bool vmf_variant,
              CostMode mode = CostMode::full);

double cost_xu(const OrientedPointSet& model, const OrientedPointSet& target,
               const KernelParams& k, bool vmf_variant,
               CostMode mode = CostMode::full,
               const CorrespondenceSet* corr = nullptr);

// Applies t to the model (points and, for TPS, jacobian-mode normals), then
// dispatches on the family.
double cost_value(const CostSpec& spec, const OrientedPointSet& model,
                  const OrientedPointSet& target, const Transform& t);

}  // namespace dirreg
