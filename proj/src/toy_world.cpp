#include "uapforge/toy_world.hpp"

#include "uapforge/resample.hpp"
#include "uapforge/rng.hpp"

namespace uapforge::toy {

Tensor token_glyph(std::string_view token, const Geometry& g) {
  const Geometry grid{4, 4, g.channels};
  Rng rng(fnv1a64(token));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd coarse(static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index i = 0; i < coarse.size(); ++i) coarse[i] = u(rng);
  return BilinearResampler(grid, g).apply(Tensor(grid, std::move(coarse)));
}

}  // namespace uapforge::toy
