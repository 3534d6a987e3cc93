"""One step of the drift implicit scheme for the CIR process.

The square root Y = sqrt(X) of a CIR process has constant noise sigma/2, and
the implicit step for Y is a quadratic with exactly one positive root. This
script compares that root with the generic monotone root finder and shows
that the step stays positive even when the Brownian increment is very
negative.
"""
import numpy as np

from driftimplicit import CirParams, StepInput, cir_spec, cir_step_closed_form, implicit_step_rootfind

params = CirParams(a=1.0, k=1.0, sigma=0.5, x0=1.0)
spec = cir_spec(params)
print(spec.label, " gamma =", spec.gamma, " kappa =", spec.kappa)

# %% a handful of steps, closed form against root finding
rng = np.random.default_rng(0)
dt = 0.1
y_prev = rng.uniform(0.05, 2.0, 6)
dW = rng.normal(0.0, np.sqrt(dt), 6)
closed = cir_step_closed_form(StepInput(y_prev, dt, dW), params)
rootfind = implicit_step_rootfind(StepInput(y_prev, dt, dW), spec)
for row in zip(y_prev, dW, closed, rootfind):
    print("y_prev={:.4f}  dW={:+.4f}  closed={:.12f}  rootfind={:.12f}".format(*row))

# %% a very negative increment: y_prev + sigma/2 dW = -5, the root is still positive
y = cir_step_closed_form(StepInput(1.0, dt, -24.0), params)
print("\nextreme increment -> Y =", y, " X =", y**2)

# %% the step is increasing in the Brownian increment
dws = np.linspace(-3, 3, 7)
print("\nY as a function of dW:", cir_step_closed_form(StepInput(1.0, dt, dws), params).round(4))
