import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

# statistical/numpy-heavy properties trip the default per-example deadline
settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# make the sibling oracles module importable from every test file
sys.path.insert(0, str(Path(__file__).parent))
