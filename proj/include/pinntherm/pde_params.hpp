#pragma once

#include <stdexcept>

namespace pinntherm {

/// Heat-diffusion model parameters. The PDE is solved for the oil temperature
/// along the tank height with volumetric sources, so the loss terms P0 and mu
/// (given in watts on the nameplate) are divided by the effective heated
/// volume v_eff, and h is a volumetric convection coefficient [W/(m^3 K)].
///
/// Only alpha = k/(rho*cp) and k enter the equations; rho*cp is derived.
/// The numeric defaults are illustrative placeholders, not measured values
/// for any particular transformer; experiment presets override them.
struct PdeParams {
    double alpha = 1e-7;   // thermal diffusivity [m^2/s]
    double k = 0.12;       // thermal conductivity [W/(m K)]
    double h = 5.0;        // volumetric convective coefficient [W/(m^3 K)]
    double p0 = 842.0;     // no-load losses [W]
    double mu = 9800.0;    // rated load losses [W]
    double height = 1.0;   // tank height H [m]
    double v_eff = 1.0;    // effective heated volume [m^3]

    double rho_cp() const { return k / alpha; }

    void validate() const {
        if (!(alpha > 0.0)) throw std::runtime_error("pde: alpha must be positive");
        if (!(k > 0.0)) throw std::runtime_error("pde: k must be positive");
        if (!(height > 0.0)) throw std::runtime_error("pde: height must be positive");
        if (!(v_eff > 0.0)) throw std::runtime_error("pde: v_eff must be positive");
        if (h < 0.0) throw std::runtime_error("pde: h must be >= 0");
        if (p0 < 0.0 || mu < 0.0) throw std::runtime_error("pde: losses must be >= 0");
    }
};

}  // namespace pinntherm
