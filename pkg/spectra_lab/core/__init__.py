# Core infrastructure modules
