# %% [markdown]
# # Utilities and collective welfare
#
# Every resident of a block earns a reward that depends only on how crowded
# the block is: it climbs linearly to 1.0 at half occupancy, then falls off
# more gently. The asymmetry matters: a block at 60% pays 0.9 while a block
# at 40% pays only 0.8, so there is always a pull toward slightly-over-full
# blocks even though the system as a whole does best at exactly one half.
#
# All utilities in the package are *integers* in units of 1/(2*capacity), so
# delta signs are exact and "no change" means literally zero.

# %%
from blocktown import (
    individual_utility,
    utility_as_float,
    system_utility,
    optimal_system_utility,
    price_of_anarchy,
    residential_gini,
)

CAPACITY = 50

print("density  reward")
for population in range(0, 51, 5):
    scaled = individual_utility(population, CAPACITY)
    print(f"  {population / CAPACITY:4.2f}   {utility_as_float(scaled, CAPACITY):5.2f}   (scaled {scaled})")

# %% [markdown]
# The collective reward is just the sum over residents. With 225 residents on
# nine 50-person blocks the global density is 0.5, so the best possible
# arrangement parks every block exactly at its peak:

# %%
balanced = [25] * 9
print("balanced system utility:", utility_as_float(system_utility(balanced, CAPACITY), CAPACITY))

best = optimal_system_utility(225, 9, CAPACITY)
print("optimal over all arrangements:", utility_as_float(best, CAPACITY))

# %% [markdown]
# The optimum comes from an exact dynamic program over (blocks, residents
# remaining) -- enumeration would be hopeless at this scale, but for tiny
# grids you can check it by hand. Three residents on two 2-person blocks must
# split 2+1, worth 2*0.5 + 1*1.0 = 2.0:

# %%
print("optimal(N=3, Q=2, H=2):", utility_as_float(optimal_system_utility(3, 2, 2), 2))

# %% [markdown]
# Two macro metrics summarize a final state. The price of anarchy compares
# achieved welfare to the optimum (1.0 = the society solved its dilemma); the
# residential Gini index measures how unevenly the population spread out
# (0 = perfectly even).

# %%
lopsided = [50, 40, 35, 30, 25, 20, 15, 10, 0]
achieved = system_utility(lopsided, CAPACITY)
print("lopsided utility:", utility_as_float(achieved, CAPACITY))
print("price of anarchy:", round(price_of_anarchy(achieved, best), 4))
print("residential gini:", float(residential_gini(lopsided)))
print("gini of the balanced split:", float(residential_gini(balanced)))
