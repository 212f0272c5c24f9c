#!/usr/bin/env python3
"""How big is the head at real backbone widths, and how wide must a
plain MLP be to match it?"""

from relish import RelishConfig, count_parameters, match_mlp_hidden, mlp_param_count

WIDTHS = (4096, 5120, 5376)

print("refinement head footprint (head_dim=256, 8 heads, 3 blocks)")
for d in WIDTHS:
    config = RelishConfig(backbone_dim=d)
    print(f"  backbone_dim={d:5d}  ->  {count_parameters(config):,} parameters")

# break one width down by component
config = RelishConfig(backbone_dim=4096)
h, d = config.head_dim, config.backbone_dim
projection = d * h + h
latent = h
per_block = (4 * (h * h + h)) + (2 * h * config.ffn_width + config.ffn_width + h) + 4 * h
output = h + 1
total = projection + latent + config.num_blocks * per_block + output
print(f"\nbreakdown at d=4096: projection {projection:,} + latent {latent:,}"
      f" + {config.num_blocks} x block {per_block:,} + output {output:,} = {total:,}")
assert total == count_parameters(config)

# a pooled MLP with the nearest parameter budget, for fair baselines
print("\nMLP widths matched to the head budget:")
for d in WIDTHS:
    budget = count_parameters(RelishConfig(backbone_dim=d))
    hidden = match_mlp_hidden(backbone_dim=d, target_params=budget)
    print(f"  d={d:5d}: hidden={hidden:4d}  ({mlp_param_count(d, hidden):,} params"
          f" vs budget {budget:,})")
