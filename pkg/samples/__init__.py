# Sample data
