# Queueing-network reduction toolkit
