// scratch experiment - not part of the suite
#include <cstdio>

#include "sparseflow/flow/solver.hpp"

using namespace sparseflow;

static VoxelGeometry make_tube(int64_t n, double spacing, double radius_vox) {
    VoxelGeometry vg;
    vg.id = "tube";
    vg.grid = GridSpec{n, n, n, spacing};
    vg.mask = VolumeField(n, n, n);
    vg.inlet_normal = {-1.0, 0.0, 0.0};
    vg.outlet_normal = {-1.0, 0.0, 0.0};
    const double c = (n - 1) / 2.0;
    for (int64_t d = 2; d <= n - 3; ++d)
        for (int64_t h = 0; h < n; ++h)
            for (int64_t w = 0; w < n; ++w) {
                const double r2 = (h - c) * (h - c) + (w - c) * (w - c);
                if (r2 > radius_vox * radius_vox) continue;
                const int64_t idx = vg.mask.index(d, h, w);
                vg.mask.values[static_cast<size_t>(idx)] = 1.0f;
                if (d >= n - 4) vg.inlet_cells.push_back(idx);
                if (d <= 3) vg.outlet_cells.push_back(idx);
            }
    return vg;
}

static double slab_flux(const FlowSnapshot& s, int64_t d, double spacing) {
    double acc = 0.0;
    for (int64_t h = 0; h < s.mask.h; ++h)
        for (int64_t w = 0; w < s.mask.w; ++w)
            if (s.mask.at(d, h, w) != 0.0f) acc += std::abs(static_cast<double>(s.vz.at(d, h, w)));
    return acc * spacing * spacing;
}

int main() {
    for (int64_t n : {24, 32}) {
        for (int64_t steps : {500, 1500, 3000}) {
            auto tube = make_tube(n, 0.004, n / 3.2);
            SolverConfig cfg;
            cfg.grid = tube.grid;
            cfg.steps = steps;
            cfg.dt = 2e-3;
            cfg.inner_iterations = 4000;
            ProjectionStepper st(tube, cfg);
            for (int64_t t = 0; t < steps; ++t) st.step(0.3);
            auto s = st.snapshot(0.3);
            double fin = slab_flux(s, n - 4, 0.004);
            double f2 = slab_flux(s, 2, 0.004), f3 = slab_flux(s, 3, 0.004), f4 = slab_flux(s, 4, 0.004),
                   f5 = slab_flux(s, 5, 0.004);
            std::printf("n=%2ld steps=%4ld in=%.6e out3=%.6e (%.2f%%) pair34=%.6e (%.2f%%) pair23=%.6e (%.2f%%)\n",
                        (long)n, (long)steps, fin, f3, 100 * (f3 - fin) / fin, 0.5 * (f3 + f4),
                        100 * (0.5 * (f3 + f4) - fin) / fin, 0.5 * (f2 + f3), 100 * (0.5 * (f2 + f3) - fin) / fin);
            (void)f5;
        }
    }
    return 0;
}
