"""
svs-refine Benchmark Module

Desk-scale convergence comparison: train a toy teacher, channel-prune it,
and fine-tune pruned, scaled and randomly initialized students.
"""
