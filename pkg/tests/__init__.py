# wpultr Tests
