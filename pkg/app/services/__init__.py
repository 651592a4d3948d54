"""
Study orchestration: convergence studies, single runs and the rescaling comparison.
"""
