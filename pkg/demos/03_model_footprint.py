"""Parameter and FLOP accounting for the two networks.

All numbers come from shape algebra; nothing is allocated at volume size.
"""

from volseg import build_coarse_spec, build_fine_spec, count_flops, count_params

for spec, size in ((build_coarse_spec(), (160, 160, 160)), (build_fine_spec(), (192, 192, 192))):
    params = count_params(spec)
    stats = count_flops(spec, size)
    print(f"=== {spec.name} network, input {'x'.join(map(str, size))} ===")
    print(f"levels {spec.levels}, base channels {spec.base_channels}, "
          f"per-level channels {spec.level_channels()}")
    print(f"parameters: {params.param_count:,} ({params.param_count/1e6:.2f} M)")
    print(f"MACs: {stats.macs:,} ({stats.macs/1e9:.1f} G)")
    print(f"FLOPs: {stats.flops:,} ({stats.flops/1e9:.1f} G)")
    print(f"{'layer':<10} {'params':>12} {'MACs':>16}")
    for layer in stats.per_layer:
        print(f"{layer.name:<10} {layer.params:>12,} {layer.macs:>16,}")
    print()

fine = build_fine_spec()
print("FLOPs scale with volume: ratio 192^3 / 96^3 =",
      count_flops(build_fine_spec(levels=4), (192,) * 3).flops
      / count_flops(build_fine_spec(levels=4), (96,) * 3).flops)
