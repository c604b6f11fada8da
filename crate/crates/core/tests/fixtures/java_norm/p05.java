public class Countdown {
    public static void main(String[] args) {
        int remaining = 10;
        while (remaining > 0) {
            if (remaining % 2 == 0) {
                System.out.println("even");
            } else {
                System.out.println("odd");
            }
            remaining--;
        }
    }
}
