from hypothesis import HealthCheck, settings

# Property suites run at 200 examples; numeric solves make per-example
# deadlines too flaky to keep.
settings.register_profile(
    "default",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")
