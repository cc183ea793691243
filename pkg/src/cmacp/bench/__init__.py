"""Gate benchmarking: Clifford synthesis, XEB, process tomography, error budget."""
