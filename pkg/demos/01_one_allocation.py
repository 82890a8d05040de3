# %% [markdown]
# One allocation, looked at closely
#
# Four craft start 96 m (in relative coordinates) away from a 150 m square.
# We compute the CLF terms at t = 0 and split the required decrease between
# Coulomb charges and thrusters for a few values of eta.

# %%
import numpy as np

from coulomb_formation import (
    AllocatorConfig,
    allocate_from_derivatives,
    evaluate,
    load_scenario,
    relative_from_absolute,
)

s = load_scenario("paper_square")
err = relative_from_absolute(s.initial, s.desired)
print("xi  =", err.xi, " |xi| = %.1f m" % np.linalg.norm(err.xi))

der = evaluate(s.clf, s.model, s.desired, err)
need = der.LfV + s.clf.epsilon * der.V
print("V = %.1f, LfV = %.3g, required decrease LfV + eps V = %.3f" % (der.V, der.LfV, need))

# %% [markdown]
# The charge form has zero diagonal and therefore zero trace, so unless it
# vanishes it always has a negative eigenvalue; that direction is where the
# charges go.

# %%
S = der.charge_form
print(np.round(S, 1))
print("trace:", np.trace(S))

# %%
for eta in (0.0, 0.5, 0.9, 0.99, 1.0):
    for q_max in (1e-2, 1.0):
        r = allocate_from_derivatives(der, s.clf.epsilon, AllocatorConfig(eta, q_max))
        print(
            "eta=%-5g q_max=%-5g branch=%-17s |q|=%.4f C  |T|=%.4f N  cap=%s  Vdot+eps V=%.1e"
            % (eta, q_max, r.branch, np.linalg.norm(r.q_star), np.linalg.norm(r.T_star), r.cap_active,
               r.predicted_Vdot + s.clf.epsilon * r.V)
        )

# %% [markdown]
# With a generous cap, eta = 1 needs no thrust at all. With q_max = 1e-2 C the
# cap binds at this large initial error and thrusters make up the shortfall;
# the decrease condition holds with equality either way.

# %% [markdown]
# The thrust is kilonewtons. At rest, the thrust direction LgTV = 2 (P Xi)_nu B
# comes only from the small off-diagonal block of P. The minimum-norm thrust
# c / |LgTV| is therefore huge, and one 0.1 s hold of it costs hundreds of N s
# of impulse. That is why the total impulse depends so strongly on the
# sampling period.

# %%
print("|LgTV| = %.3e, one hold at eta=0 costs %.0f N s" % (np.linalg.norm(der.LgTV), need / np.linalg.norm(der.LgTV) * s.sim.dt))
