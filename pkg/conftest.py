def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: full MNIST reproduction runs (need NORMBENCH_MNIST_DIR)"
    )
