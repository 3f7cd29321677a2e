#include "schns.h"
#include <stdio.h>
#include <stdlib.h>

int main(void) {
    SchnsSim *sim = schns_sim_new("[grid]\nnx = 16\nny = 16\n[scheme]\ndt = 2e-4\n", 0);
    if (!sim) {
        fprintf(stderr, "construction failed: %s\n", schns_last_error());
        return 1;
    }
    SchnsEnergy e0;
    if (schns_sim_energy(sim, &e0) != Ok) return 2;
    if (schns_sim_step(sim, 25) != Ok) {
        fprintf(stderr, "step failed: %s\n", schns_last_error());
        return 3;
    }
    SchnsEnergy e1;
    if (schns_sim_energy(sim, &e1) != Ok) return 4;
    uint32_t nx = 0, ny = 0;
    if (schns_sim_grid(sim, &nx, &ny) != Ok || nx != 16 || ny != 16) return 5;
    double *phi = malloc(sizeof(double) * nx * ny);
    if (schns_sim_field(sim, Phi, phi, nx * ny) != Ok) return 6;
    double t = schns_sim_time(sim);
    printf("t = %.6f  E0 = %.6f  E1 = %.6f  mass drift = %.3e  phi[0] = %.4f\n",
           t, e0.total, e1.total, e1.mass - e0.mass, phi[0]);
    free(phi);
    schns_sim_free(sim);
    if (t < 25 * 2e-4 - 1e-12 || t > 25 * 2e-4 + 1e-12) return 7;
    if (e1.mass - e0.mass > 1e-9 || e0.mass - e1.mass > 1e-9) return 8;
    return 0;
}
