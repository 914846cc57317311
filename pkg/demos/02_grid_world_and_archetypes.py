# %% [markdown]
# # The grid world and the nine action archetypes
#
# A world is a vector of agent locations over Q equal blocks. Placement is
# seeded and uniform over non-full blocks, so the same seed always produces
# the same starting city.

# %%
from blocktown import classify_action, compute_deltas, initial_world

world = initial_world(num_blocks=9, capacity=50, num_agents=225, seed=42)
print("populations:", world.populations)
print("same seed again:", initial_world(9, 50, 225, seed=42).populations)

# %% [markdown]
# Moves are legal into any block that is not full; a move into your own block
# is just a stay. Every move changes two quantities at once: the mover's own
# reward and the whole system's reward. The pair of *signs* of those exact
# deltas places the action in a 3x3 archetype grid, from win-win to
# lose-lose.

# %%
agent = next(i for i, q in enumerate(world.locations) if world.populations[q] >= 26)
crowded = world.locations[agent]
emptiest = min(range(9), key=lambda q: world.populations[q])

d_ind, d_sys = compute_deltas(world, agent, emptiest)
print(
    f"agent in block {crowded} ({world.populations[crowded]}/50) -> "
    f"block {emptiest} ({world.populations[emptiest]}/50)"
)
print(f"  personal delta {d_ind / 100:+.2f}, system delta {d_sys / 100:+.2f}")
print("  archetype:", classify_action(d_ind, d_sys).value)

# %% [markdown]
# The canonical altruistic sacrifice: leaving a 26/50 block for one holding
# 23 costs the mover 0.02 personally but lifts the collective total by 1.40.

# %%
from blocktown import GridWorld

hand = GridWorld(capacity=50, locations=[0] * 26 + [1] * 23, populations=[26, 23])
d_ind, d_sys = compute_deltas(hand, 0, 1)
print(f"personal {d_ind / 100:+.2f}, system {d_sys / 100:+.2f}",
      "->", classify_action(d_ind, d_sys).value)

# %% [markdown]
# ...and the mirror image, a selfish gain: grabbing a slightly better seat
# while making the city worse off overall.

# %%
hand = GridWorld(capacity=50, locations=[0] * 24 + [1] * 25, populations=[24, 25])
d_ind, d_sys = compute_deltas(hand, 0, 1)
print(f"personal {d_ind / 100:+.2f}, system {d_sys / 100:+.2f}",
      "->", classify_action(d_ind, d_sys).value)
